#pragma once

// Lane-parallel arithmetic used by the Monte Carlo propagation of jump-linear
// systems. Data is structure-of-arrays: element (r, k) of a rows x lanes block
// lives at [r * lanes + k], so one SIMD register holds the same state component
// of several independent trajectories.
//
// Every backend performs the same multiplies and adds in the same order, so the
// results are bit-identical across backends.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace wncs::kernels {

enum class Backend { scalar, avx2 };

std::string_view to_string(Backend b) noexcept;

/// True if the backend is compiled in and the CPU supports it.
bool backend_available(Backend b) noexcept;

/// Best available backend (runtime CPU detection).
Backend detect_backend() noexcept;

/// Backend used by the dispatching entry points below. Defaults to detect_backend().
Backend active_backend() noexcept;

/// Test hook. Throws std::invalid_argument if the backend is unavailable.
void set_active_backend(Backend b);

/// out(r, k) = sum_c mat(r, c) * in(c, k), summed in increasing c.
/// mat is rows x cols row-major; in is cols x lanes; out is rows x lanes.
void batched_matvec(std::span<const double> mat, std::size_t rows, std::size_t cols,
                    std::span<const double> in, std::span<double> out, std::size_t lanes);

/// dst(r, k) = src(r, k) for every lane with select[k] == which.
void blend_lanes(std::span<const std::uint8_t> select, std::uint8_t which,
                 std::span<const double> src, std::span<double> dst, std::size_t rows,
                 std::size_t lanes);

/// out(k) = sum_r in(r, k)^2.
void lane_sum_squares(std::span<const double> in, std::size_t rows, std::span<double> out,
                      std::size_t lanes);

namespace scalar {
void batched_matvec(const double* mat, std::size_t rows, std::size_t cols, const double* in,
                    double* out, std::size_t lanes);
void blend_lanes(const std::uint8_t* select, std::uint8_t which, const double* src, double* dst,
                 std::size_t rows, std::size_t lanes);
void lane_sum_squares(const double* in, std::size_t rows, double* out, std::size_t lanes);
} // namespace scalar

namespace avx2 {
void batched_matvec(const double* mat, std::size_t rows, std::size_t cols, const double* in,
                    double* out, std::size_t lanes);
void blend_lanes(const std::uint8_t* select, std::uint8_t which, const double* src, double* dst,
                 std::size_t rows, std::size_t lanes);
void lane_sum_squares(const double* in, std::size_t rows, double* out, std::size_t lanes);
} // namespace avx2

} // namespace wncs::kernels
