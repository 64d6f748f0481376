#include "kernel_math.hpp"

namespace rbsde::kernels {

int basis_size(int state_dim, int degree) {
  int n = 1;
  if (degree >= 1) n += state_dim;
  if (degree >= 2) n += state_dim * (state_dim + 1) / 2;
  return n;
}

namespace reference {

void tree_average(const TreeAverageArgs& a) {
  std::vector<double> scratch;
  for (std::size_t i = 0; i < a.parents; ++i) detail::tree_average_node(a, i, scratch);
}

void design_matrix(const DesignArgs& a, Mat& out) {
  out.resize(static_cast<Eigen::Index>(a.rows), basis_size(a.brownian_dim + a.mark_count, a.degree));
  for (std::size_t r = 0; r < a.rows; ++r) detail::design_row(a, r, out);
}

void apply_fit(const Mat& design, const Mat& coef, std::span<double> out) {
  for (Eigen::Index r = 0; r < design.rows(); ++r) detail::fit_row(design, coef, r, out);
}

void sample_step(const SampleStepArgs& a) {
  for (std::size_t p = 0; p < a.paths; ++p) detail::sample_path_step(a, p);
}

void backward_step(const BackwardStepArgs& a) {
  for (std::size_t i = 0; i < a.nodes; ++i) detail::backward_node(a, i);
}

}  // namespace reference
}  // namespace rbsde::kernels
