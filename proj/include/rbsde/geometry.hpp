#pragma once

#include <Eigen/Dense>

#include <variant>
#include <vector>

#include "rbsde/errors.hpp"

namespace rbsde {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Every tolerance used by the library lives here.
struct NumericPolicy {
  double geometry = 1e-12;     // projection residual, membership slack
  double property = 1e-10;     // inequality checks on computed solutions
  double skorokhod = 1e-8;     // minimality residual slack
  double boundary_contact = 1e-10;
  int dykstra_max_cycles = 100000;
  double lipschitz_slack = 1e-9;
};

inline constexpr NumericPolicy kPolicy{};

struct Ball {
  Vec center;
  double radius = 0.0;
};

struct Box {
  Vec lower;
  Vec upper;
};

// {x : <a_i, x> <= b_i}; rows of `normals` are unit vectors. Vertices are
// enumerated once at construction and serve both validation and support().
struct Polytope {
  Mat normals;
  Vec offsets;
  Mat vertices;
};

// Bounded closed convex set with nonempty interior.
class ConvexBody {
 public:
  static ConvexBody ball(Vec center, double radius);
  static ConvexBody box(Vec lower, Vec upper);
  // Throws InvalidArgument unless the half-spaces cut out a bounded set with
  // nonempty interior.
  static ConvexBody polytope(Mat normals, Vec offsets);

  int dim() const noexcept { return dim_; }

  bool contains(const Vec& x, double tol = 0.0) const;
  Vec project(const Vec& x) const;
  double distance(const Vec& x) const;
  // dist(a, boundary) for a inside the body.
  double boundary_margin(const Vec& a) const;
  double support(const Vec& u) const;
  // One unit vector n with <y - x, n> <= 0 for all x in the body. Corners
  // resolve to the lowest face index.
  Vec inward_normal(const Vec& y, double tol) const;
  // Unique y with y + w (y - project(y)) = target; w = inf gives project().
  Vec penalty_resolvent(const Vec& target, double w) const;

  double diameter() const;

  // Face normals of box/polytope bodies (empty for balls). Box faces are
  // ordered (-e_0, +e_0, -e_1, +e_1, ...).
  Mat face_normals() const;
  Vec face_offsets() const;

  const Ball* as_ball() const noexcept { return std::get_if<Ball>(&shape_); }
  const Box* as_box() const noexcept { return std::get_if<Box>(&shape_); }
  const Polytope* as_polytope() const noexcept {
    return std::get_if<Polytope>(&shape_);
  }

 private:
  using Shape = std::variant<Ball, Box, Polytope>;
  ConvexBody(Shape s, int dim) : shape_(std::move(s)), dim_(dim) {}

  void check_dim(const Vec& x, const char* what) const;
  Vec project_polytope(const Polytope& p, const Vec& x) const;

  Shape shape_;
  int dim_ = 0;
};

// Deterministic unit directions: exact pair for m = 1, equally spaced angles
// for m = 2, a Fibonacci lattice for m = 3, and axes plus a Halton-driven
// spread above that.
std::vector<Vec> direction_set(int dim, int n_dirs);

// Hausdorff distance through support functions. Exact for ball pairs;
// otherwise the max support gap over direction_set plus all face normals,
// which is a lower bound at the resolution of the direction set.
double hausdorff(const ConvexBody& a, const ConvexBody& b, int n_dirs = 64);

}  // namespace rbsde
