#include <exception>

#include "kernel_math.hpp"

namespace rbsde::kernels::omp {

namespace {

// Runs fn(i) for i in [0, n) across threads; the first exception raised in a
// worker is rethrown on the calling thread.
template <class Fn>
void parallel_rows(std::size_t n, Fn&& fn) {
  std::exception_ptr err;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(rbsde_kernel_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace

void tree_average(const TreeAverageArgs& a) {
  const auto count = static_cast<std::int64_t>(a.parents);
#pragma omp parallel
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) detail::tree_average_node(a, static_cast<std::size_t>(i), scratch);
  }
}

void design_matrix(const DesignArgs& a, Mat& out) {
  out.resize(static_cast<Eigen::Index>(a.rows), basis_size(a.brownian_dim + a.mark_count, a.degree));
  parallel_rows(a.rows, [&](std::size_t r) { detail::design_row(a, r, out); });
}

void apply_fit(const Mat& design, const Mat& coef, std::span<double> out) {
  parallel_rows(static_cast<std::size_t>(design.rows()),
                [&](std::size_t r) { detail::fit_row(design, coef, static_cast<Eigen::Index>(r), out); });
}

void sample_step(const SampleStepArgs& a) {
  parallel_rows(a.paths, [&](std::size_t p) { detail::sample_path_step(a, p); });
}

void backward_step(const BackwardStepArgs& a) {
  parallel_rows(a.nodes, [&](std::size_t i) { detail::backward_node(a, i); });
}

}  // namespace rbsde::kernels::omp
