#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <cstring>
#include <random>

#include "rbsde/kernels.hpp"

using namespace rbsde;

namespace {

template <class T>
bool bitwise_equal(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

bool bitwise_equal(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<double> noise(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

const int kThreads[] = {1, 2, 3, 7};

}  // namespace

TEST_CASE("tree_average: serial and parallel agree bitwise") {
  const int d = 2, width = 3;
  const std::vector<double> q{0.7, 0.2, 0.1};
  const std::size_t parents = 513, branching = (1u << d) * q.size();
  const auto next = noise(parents * branching * width, 1);
  kernels::TreeAverageArgs a{d, q, parents, next, width, {}};
  std::vector<double> ref(parents * width);
  a.out = ref;
  kernels::reference::tree_average(a);
  for (int t : kThreads) {
    omp_set_num_threads(t);
    std::vector<double> got(parents * width);
    a.out = got;
    kernels::omp::tree_average(a);
    CHECK(bitwise_equal(got, ref));
  }
}

TEST_CASE("design_matrix and apply_fit: serial and parallel agree bitwise") {
  const std::size_t rows = 1001;
  const int d = 2, k = 1;
  const auto w = noise(rows * d, 2);
  std::vector<std::int32_t> counts(rows * k);
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = static_cast<std::int32_t>(i % 3);
  for (int degree : {0, 1, 2}) {
    kernels::DesignArgs a{rows, d, k, w, counts, degree};
    Mat ref;
    kernels::reference::design_matrix(a, ref);
    CHECK(ref.cols() == kernels::basis_size(d + k, degree));
    const Mat coef = Mat::Random(ref.cols(), 2);
    std::vector<double> fit_ref(rows * 2);
    kernels::reference::apply_fit(ref, coef, fit_ref);
    for (int t : kThreads) {
      omp_set_num_threads(t);
      Mat got;
      kernels::omp::design_matrix(a, got);
      CHECK(bitwise_equal(got, ref));
      std::vector<double> fit(rows * 2);
      kernels::omp::apply_fit(got, coef, fit);
      CHECK(bitwise_equal(fit, fit_ref));
    }
  }
}

TEST_CASE("basis_size") {
  CHECK(kernels::basis_size(1, 2) == 3);
  CHECK(kernels::basis_size(2, 2) == 6);
  CHECK(kernels::basis_size(3, 1) == 4);
  CHECK(kernels::basis_size(4, 0) == 1);
}

TEST_CASE("sample_step: serial and parallel agree bitwise") {
  const std::size_t paths = 4097;
  const int d = 2;
  const std::vector<double> lh{0.05, 0.1};
  const auto prev_w = noise(paths * d, 3);
  std::vector<std::int32_t> prev_counts(paths * 2, 1);
  auto run = [&](Exec e, std::vector<double>& w, std::vector<double>& dw, std::vector<double>& dnu,
                 std::vector<std::int32_t>& counts) {
    w.assign(paths * d, 0), dw.assign(paths * d, 0), dnu.assign(paths * 2, 0), counts.assign(paths * 2, 0);
    kernels::SampleStepArgs a;
    a.brownian_dim = d;
    a.lambda_h = lh;
    a.step = 0.125;
    a.seed = 42;
    a.step_index = 3;
    a.paths = paths;
    a.prev_w = prev_w;
    a.prev_counts = prev_counts;
    a.w = w, a.dw = dw, a.dnu = dnu, a.counts = counts;
    kernels::sample_step(e, a);
  };
  std::vector<double> w0, dw0, dnu0;
  std::vector<std::int32_t> c0;
  run(Exec::Serial, w0, dw0, dnu0, c0);
  for (int t : kThreads) {
    omp_set_num_threads(t);
    std::vector<double> w, dw, dnu;
    std::vector<std::int32_t> c;
    run(Exec::Parallel, w, dw, dnu, c);
    CHECK(bitwise_equal(w, w0));
    CHECK(bitwise_equal(dw, dw0));
    CHECK(bitwise_equal(dnu, dnu0));
    CHECK(c == c0);
  }
  // W advances by the increment; jump increments take the two compensated values.
  for (std::size_t i = 0; i < paths * d; ++i) CHECK(w0[i] == prev_w[i] + dw0[i]);
  for (std::size_t i = 0; i < paths * 2; ++i) {
    const double l = lh[i % 2];
    CHECK((dnu0[i] == 1.0 - l || dnu0[i] == -l));
    CHECK(c0[i] - prev_counts[i] == (dnu0[i] > 0 ? 1 : 0));
  }
}

TEST_CASE("backward_step: serial and parallel agree bitwise") {
  const std::size_t nodes = 777;
  const int m = 2, d = 1, k = 1;
  const int mw = m * (1 + d + k);
  const auto moments = noise(nodes * mw, 4);
  const std::vector<double> vs{0.1 * 0.9};
  std::vector<ConvexBody> per_node;
  for (std::size_t i = 0; i < nodes; ++i)
    per_node.push_back(ConvexBody::ball(Vec::Constant(m, 0.001 * i), 0.5 + 0.001 * i));
  const DriverFn f = [](double t, const Vec& y, const Mat& z, const Mat& v) -> Vec {
    return -0.5 * y + (0.1 * z.rowwise().sum()) + 0.2 * v.rowwise().sum() + Vec::Constant(y.size(), t);
  };
  struct Out {
    std::vector<double> y, z, v, dk, target, drift;
  };
  auto run = [&](Exec e, double w, bool shared) {
    Out o;
    o.y.assign(nodes * m, 0), o.z.assign(nodes * m * d, 0), o.v.assign(nodes * m * k, 0);
    o.dk.assign(nodes * m, 0), o.target.assign(nodes * m, 0), o.drift.assign(nodes * m, 0);
    kernels::BackwardStepArgs a;
    a.nodes = nodes, a.m = m, a.d = d, a.k_marks = k;
    a.t = 0.25, a.step = 0.125, a.penalty_weight = w;
    a.moments = moments;
    a.v_scale = vs;
    a.bodies = shared ? std::span<const ConvexBody>(per_node.data(), 1) : std::span<const ConvexBody>(per_node);
    a.driver = &f;
    a.y = o.y, a.z = o.z, a.v = o.v, a.dk = o.dk, a.target = o.target, a.drift = o.drift;
    kernels::backward_step(e, a);
    return o;
  };
  for (double w : {0.5, 32.0, std::numeric_limits<double>::infinity()}) {
    for (bool shared : {true, false}) {
      const Out ref = run(Exec::Serial, w, shared);
      for (int t : kThreads) {
        omp_set_num_threads(t);
        const Out got = run(Exec::Parallel, w, shared);
        CHECK(bitwise_equal(got.y, ref.y));
        CHECK(bitwise_equal(got.z, ref.z));
        CHECK(bitwise_equal(got.v, ref.v));
        CHECK(bitwise_equal(got.dk, ref.dk));
        CHECK(bitwise_equal(got.target, ref.target));
        CHECK(bitwise_equal(got.drift, ref.drift));
      }
      // Per node: Y is the resolvent of the target, dK = Y - target.
      for (std::size_t i = 0; i < nodes; ++i) {
        const ConvexBody& b = shared ? per_node[0] : per_node[i];
        const Vec tgt = Eigen::Map<const Vec>(ref.target.data() + i * m, m);
        const Vec y = Eigen::Map<const Vec>(ref.y.data() + i * m, m);
        const Vec dk = Eigen::Map<const Vec>(ref.dk.data() + i * m, m);
        CHECK((y - b.penalty_resolvent(tgt, w)).norm() <= 1e-15);
        CHECK((dk - (y - tgt)).norm() <= 1e-15);
      }
    }
  }
}

TEST_CASE("for_each_index rethrows worker exceptions") {
  omp_set_num_threads(3);
  CHECK_THROWS_AS(kernels::for_each_index(Exec::Parallel, 100,
                                          [](std::size_t i) {
                                            if (i == 57) throw InvalidArgument("boom");
                                          }),
                  InvalidArgument);
}
