#pragma once

#include "risplan/core.hpp"

#include <fftw3.h>

#include <mutex>

namespace risplan::fft {

/// FFTW's planner is not re-entrant.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

enum class Direction { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

/// Unnormalized in-place transform of every column of a column-major matrix.
inline void transform_columns(CMat& data, Direction dir) {
  if (data.size() == 0) return;
  const int n = static_cast<int>(data.rows());
  const int howmany = static_cast<int>(data.cols());
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_many_dft(1, &n, howmany, ptr, nullptr, 1, n, ptr, nullptr, 1, n,
                              static_cast<int>(dir), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

/// Unnormalized in-place transform of every row.
inline void transform_rows(CMat& data, Direction dir) {
  if (data.size() == 0) return;
  const int n = static_cast<int>(data.cols());
  const int howmany = static_cast<int>(data.rows());
  const int stride = static_cast<int>(data.rows());
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_many_dft(1, &n, howmany, ptr, nullptr, stride, 1, ptr, nullptr, stride, 1,
                              static_cast<int>(dir), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace risplan::fft
