#include "rbsde/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace rbsde {

namespace {

constexpr double kUnitNormTol = 1e-12;
constexpr double kVertexFeasTol = 1e-9;
constexpr double kMaxCombinations = 2e6;

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Calls fn(indices) for every k-subset of {0..n-1} in lexicographic order.
template <class Fn>
void for_each_subset(int n, int k, Fn&& fn) {
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  if (k > n) return;
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

Mat rows_of(const Mat& a, const std::vector<int>& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(r) = a.row(idx[r]);
  return out;
}

void validate_polytope(Polytope& p) {
  const int m = static_cast<int>(p.normals.cols());
  const int f = static_cast<int>(p.normals.rows());
  if (m < 1) throw InvalidArgument("polytope: dimension must be positive");
  if (p.offsets.size() != f)
    throw DimensionMismatch("polytope offsets", f, p.offsets.size());
  for (int i = 0; i < f; ++i) {
    if (std::abs(p.normals.row(i).norm() - 1.0) > kUnitNormTol)
      throw InvalidArgument("polytope: normal " + std::to_string(i) +
                            " is not a unit vector");
  }
  if (f < m + 1) throw InvalidArgument("polytope: too few faces to be bounded");
  if (binomial(f, m) > kMaxCombinations)
    throw InvalidArgument("polytope: too many faces for vertex enumeration");

  Eigen::FullPivLU<Mat> lu(p.normals);
  if (lu.rank() < m) throw InvalidArgument("polytope: unbounded (normals do not span)");

  // With full-rank normals the recession cone {d : A d <= 0} is pointed, so it
  // is trivial iff no extreme ray exists; each ray is cut out by m-1 faces.
  auto is_recession = [&](const Vec& d) {
    return (p.normals * d).maxCoeff() <= kUnitNormTol * d.norm();
  };
  bool unbounded = false;
  if (m == 1) {
    Vec d = Vec::Ones(1);
    unbounded = is_recession(d) || is_recession(-d);
  } else {
    for_each_subset(f, m - 1, [&](const std::vector<int>& idx) {
      if (unbounded) return;
      Mat sub = rows_of(p.normals, idx);
      Eigen::FullPivLU<Mat> slu(sub);
      if (slu.rank() != m - 1) return;
      Mat ker = slu.kernel();
      Vec d = ker.col(0).normalized();
      if (is_recession(d) || is_recession(-d)) unbounded = true;
    });
  }
  if (unbounded) throw InvalidArgument("polytope: unbounded");

  std::vector<Vec> verts;
  const double scale = 1.0 + p.offsets.cwiseAbs().maxCoeff();
  for_each_subset(f, m, [&](const std::vector<int>& idx) {
    Mat sub = rows_of(p.normals, idx);
    Eigen::FullPivLU<Mat> slu(sub);
    if (!slu.isInvertible()) return;
    Vec rhs(m);
    for (int r = 0; r < m; ++r) rhs(r) = p.offsets(idx[r]);
    Vec v = slu.solve(rhs);
    if ((p.normals * v - p.offsets).maxCoeff() > kVertexFeasTol * scale) return;
    for (const auto& w : verts)
      if ((w - v).norm() <= kVertexFeasTol * scale) return;
    verts.push_back(std::move(v));
  });
  if (verts.empty()) throw InvalidArgument("polytope: empty");
  p.vertices.resize(static_cast<Eigen::Index>(verts.size()), m);
  Vec centroid = Vec::Zero(m);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    p.vertices.row(i) = verts[i].transpose();
    centroid += verts[i];
  }
  centroid /= static_cast<double>(verts.size());
  if ((p.offsets - p.normals * centroid).minCoeff() <= kPolicy.geometry * scale)
    throw InvalidArgument("polytope: empty interior");
}

}  // namespace

ConvexBody ConvexBody::ball(Vec center, double radius) {
  if (center.size() < 1) throw InvalidArgument("ball: dimension must be positive");
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw InvalidArgument("ball: radius must be positive");
  const int m = static_cast<int>(center.size());
  return ConvexBody(Ball{std::move(center), radius}, m);
}

ConvexBody ConvexBody::box(Vec lower, Vec upper) {
  if (lower.size() < 1) throw InvalidArgument("box: dimension must be positive");
  if (lower.size() != upper.size())
    throw DimensionMismatch("box bounds", lower.size(), upper.size());
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower(i) < upper(i)) || !std::isfinite(lower(i)) || !std::isfinite(upper(i)))
      throw InvalidArgument("box: lower < upper required componentwise");
  }
  const int m = static_cast<int>(lower.size());
  return ConvexBody(Box{std::move(lower), std::move(upper)}, m);
}

ConvexBody ConvexBody::polytope(Mat normals, Vec offsets) {
  Polytope p{std::move(normals), std::move(offsets), Mat()};
  validate_polytope(p);
  const int m = static_cast<int>(p.normals.cols());
  return ConvexBody(std::move(p), m);
}

void ConvexBody::check_dim(const Vec& x, const char* what) const {
  if (x.size() != dim_) throw DimensionMismatch(what, dim_, x.size());
}

Mat ConvexBody::face_normals() const {
  if (const auto* b = as_box()) {
    const int m = dim_;
    Mat n = Mat::Zero(2 * m, m);
    for (int i = 0; i < m; ++i) {
      n(2 * i, i) = -1.0;
      n(2 * i + 1, i) = 1.0;
    }
    (void)b;
    return n;
  }
  if (const auto* p = as_polytope()) return p->normals;
  return Mat(0, dim_);
}

Vec ConvexBody::face_offsets() const {
  if (const auto* b = as_box()) {
    Vec o(2 * dim_);
    for (int i = 0; i < dim_; ++i) {
      o(2 * i) = -b->lower(i);
      o(2 * i + 1) = b->upper(i);
    }
    return o;
  }
  if (const auto* p = as_polytope()) return p->offsets;
  return Vec(0);
}

bool ConvexBody::contains(const Vec& x, double tol) const {
  check_dim(x, "contains");
  if (const auto* b = as_ball()) return (x - b->center).norm() - b->radius <= tol;
  if (const auto* b = as_box()) {
    double d2 = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const double e = std::max({b->lower(i) - x(i), x(i) - b->upper(i), 0.0});
      d2 += e * e;
    }
    return std::sqrt(d2) <= tol;
  }
  const auto& p = *as_polytope();
  if ((p.normals * x - p.offsets).maxCoeff() <= 0.0) return true;
  return distance(x) <= tol;
}

Vec ConvexBody::project(const Vec& x) const {
  check_dim(x, "project");
  if (const auto* b = as_ball()) {
    const Vec diff = x - b->center;
    const double r = diff.norm();
    if (r <= b->radius) return x;
    return b->center + diff * (b->radius / r);
  }
  if (const auto* b = as_box()) return x.cwiseMax(b->lower).cwiseMin(b->upper);
  return project_polytope(*as_polytope(), x);
}

// Dykstra's alternating projections over the half-spaces, followed by an
// exact KKT solve on the active set Dykstra identifies. The polish is
// accepted only if it verifies primal feasibility and dual sign.
Vec ConvexBody::project_polytope(const Polytope& p, const Vec& x) const {
  const Mat& a = p.normals;
  const Vec& b = p.offsets;
  if ((a * x - b).maxCoeff() <= 0.0) return x;

  const int f = static_cast<int>(a.rows());
  const double scale = std::max({1.0, x.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  const double tol = kPolicy.geometry * scale;

  Mat corr = Mat::Zero(dim_, f);
  Vec y = x;
  bool converged = false;
  for (int cycle = 0; cycle < kPolicy.dykstra_max_cycles; ++cycle) {
    const Vec prev = y;
    for (int i = 0; i < f; ++i) {
      const Vec z = y + corr.col(i);
      const double s = a.row(i).dot(z) - b(i);
      Vec zi = z;
      if (s > 0.0) zi -= s * a.row(i).transpose();
      corr.col(i) = z - zi;
      y = zi;
    }
    const double viol = std::max(0.0, (a * y - b).maxCoeff());
    if ((y - prev).norm() <= tol && viol <= tol) {
      converged = true;
      break;
    }
  }

  std::vector<int> active;
  for (int i = 0; i < f; ++i)
    if (corr.col(i).norm() > tol) active.push_back(i);

  for (int iter = 0; iter <= 2 * f; ++iter) {
    Vec cand = x;
    Vec mu;
    if (!active.empty()) {
      const Mat as = rows_of(a, active);
      Vec bs(static_cast<Eigen::Index>(active.size()));
      for (std::size_t r = 0; r < active.size(); ++r) bs(r) = b(active[r]);
      const Mat gram = as * as.transpose();
      mu = gram.completeOrthogonalDecomposition().solve(as * x - bs);
      cand = x - as.transpose() * mu;
      if ((as * cand - bs).cwiseAbs().maxCoeff() > tol) break;
      Eigen::Index worst = 0;
      if (mu.minCoeff(&worst) < -tol) {
        active.erase(active.begin() + worst);
        continue;
      }
    }
    Eigen::Index worst = 0;
    const double viol = (a * cand - b).maxCoeff(&worst);
    if (viol > tol) {
      active.push_back(static_cast<int>(worst));
      std::sort(active.begin(), active.end());
      continue;
    }
    return cand;
  }
  if (converged) return y;
  throw ProjectionNotConverged("polytope projection: residual above " +
                               std::to_string(tol) + " after iteration cap");
}

double ConvexBody::distance(const Vec& x) const { return (x - project(x)).norm(); }

double ConvexBody::boundary_margin(const Vec& a) const {
  check_dim(a, "boundary_margin");
  double margin = 0.0;
  if (const auto* b = as_ball()) {
    margin = b->radius - (a - b->center).norm();
  } else if (const auto* b = as_box()) {
    margin = std::min((a - b->lower).minCoeff(), (b->upper - a).minCoeff());
  } else {
    const auto& p = *as_polytope();
    margin = (p.offsets - p.normals * a).minCoeff();
  }
  if (margin < -kPolicy.geometry * std::max(1.0, a.cwiseAbs().maxCoeff()))
    throw InvalidArgument("boundary_margin: point lies outside the body");
  return std::max(margin, 0.0);
}

double ConvexBody::support(const Vec& u) const {
  check_dim(u, "support");
  if (const auto* b = as_ball()) return u.dot(b->center) + b->radius * u.norm();
  if (const auto* b = as_box()) {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += u(i) >= 0.0 ? u(i) * b->upper(i) : u(i) * b->lower(i);
    return s;
  }
  return (as_polytope()->vertices * u).maxCoeff();
}

Vec ConvexBody::inward_normal(const Vec& y, double tol) const {
  check_dim(y, "inward_normal");
  if (const auto* b = as_ball()) {
    const Vec diff = b->center - y;
    const double r = diff.norm();
    if (std::abs(r - b->radius) > tol)
      throw InvalidArgument("inward_normal: point is not on the boundary");
    return diff / r;
  }
  const Mat n = face_normals();
  const Vec o = face_offsets();
  const Vec slack = o - n * y;
  const double inside_margin = slack.minCoeff();
  const bool near = inside_margin >= 0.0 ? inside_margin <= tol : distance(y) <= tol;
  if (!near) throw InvalidArgument("inward_normal: point is not on the boundary");
  for (Eigen::Index i = 0; i < slack.size(); ++i)
    if (slack(i) <= tol) return -n.row(i).transpose();
  throw InvalidArgument("inward_normal: no tight face");
}

Vec ConvexBody::penalty_resolvent(const Vec& target, double w) const {
  check_dim(target, "penalty_resolvent");
  if (!(w >= 0.0)) throw InvalidArgument("penalty_resolvent: weight must be >= 0");
  const Vec proj = project(target);
  if (proj == target) return target;
  if (std::isinf(w)) return proj;
  // Points of the segment [proj, target] all project onto proj.
  return (target + w * proj) / (1.0 + w);
}

double ConvexBody::diameter() const {
  if (const auto* b = as_ball()) return 2.0 * b->radius;
  if (const auto* b = as_box()) return (b->upper - b->lower).norm();
  const Mat& v = as_polytope()->vertices;
  double d = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = i + 1; j < v.rows(); ++j) d = std::max(d, (v.row(i) - v.row(j)).norm());
  return d;
}

namespace {

double halton(std::uint64_t index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                           43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};

}  // namespace

std::vector<Vec> direction_set(int dim, int n_dirs) {
  if (dim < 1) throw InvalidArgument("direction_set: dimension must be positive");
  std::vector<Vec> dirs;
  if (dim == 1) {
    dirs.push_back(Vec::Constant(1, 1.0));
    dirs.push_back(Vec::Constant(1, -1.0));
    return dirs;
  }
  if (dim == 2) {
    for (int i = 0; i < n_dirs; ++i) {
      const double th = 2.0 * std::numbers::pi * i / n_dirs;
      Vec u(2);
      u << std::cos(th), std::sin(th);
      dirs.push_back(u);
    }
    return dirs;
  }
  if (dim == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n_dirs; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / n_dirs;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      Vec u(3);
      u << r * std::cos(golden * i), r * std::sin(golden * i), z;
      dirs.push_back(u);
    }
    return dirs;
  }
  if (2 * ((dim + 1) / 2) > static_cast<int>(std::size(kPrimes)))
    throw InvalidArgument("direction_set: dimension too large");
  for (int i = 0; i < dim; ++i) {
    dirs.push_back(Vec::Unit(dim, i));
    dirs.push_back(-Vec::Unit(dim, i));
  }
  for (int i = 0; static_cast<int>(dirs.size()) < n_dirs; ++i) {
    Vec g(dim);
    for (int c = 0; c < dim; c += 2) {
      const double u1 = 1.0 - halton(i + 1, kPrimes[c]);
      const double u2 = halton(i + 1, kPrimes[c + 1]);
      const double rad = std::sqrt(-2.0 * std::log(u1));
      g(c) = rad * std::cos(2.0 * std::numbers::pi * u2);
      if (c + 1 < dim) g(c + 1) = rad * std::sin(2.0 * std::numbers::pi * u2);
    }
    if (g.norm() > 0.0) dirs.push_back(g.normalized());
  }
  return dirs;
}

double hausdorff(const ConvexBody& a, const ConvexBody& b, int n_dirs) {
  if (a.dim() != b.dim()) throw DimensionMismatch("hausdorff", a.dim(), b.dim());
  if (n_dirs < 2 * a.dim()) throw InvalidArgument("hausdorff: need n_dirs >= 2m");
  const auto* ba = a.as_ball();
  const auto* bb = b.as_ball();
  if (ba && bb) return (ba->center - bb->center).norm() + std::abs(ba->radius - bb->radius);

  double best = 0.0;
  auto probe = [&](const Vec& u) { best = std::max(best, std::abs(a.support(u) - b.support(u))); };
  for (const auto& u : direction_set(a.dim(), n_dirs)) probe(u);
  for (const ConvexBody* body : {&a, &b}) {
    const Mat n = body->face_normals();
    for (Eigen::Index i = 0; i < n.rows(); ++i) {
      probe(n.row(i).transpose());
      probe(-n.row(i).transpose());
    }
  }
  return best;
}

}  // namespace rbsde
