#include "wncs/kernels.hpp"

#include <atomic>
#include <cassert>
#include <stdexcept>

namespace wncs::kernels {

namespace {

bool cpu_has_avx2() noexcept {
#if defined(WNCS_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

std::atomic<Backend>& active() {
    static std::atomic<Backend> b{detect_backend()};
    return b;
}

} // namespace

std::string_view to_string(Backend b) noexcept {
    switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    }
    return "unknown";
}

bool backend_available(Backend b) noexcept {
    return b == Backend::scalar || (b == Backend::avx2 && cpu_has_avx2());
}

Backend detect_backend() noexcept { return cpu_has_avx2() ? Backend::avx2 : Backend::scalar; }

Backend active_backend() noexcept { return active().load(std::memory_order_relaxed); }

void set_active_backend(Backend b) {
    if (!backend_available(b)) {
        throw std::invalid_argument("kernel backend not available: " + std::string(to_string(b)));
    }
    active().store(b, std::memory_order_relaxed);
}

void batched_matvec(std::span<const double> mat, std::size_t rows, std::size_t cols,
                    std::span<const double> in, std::span<double> out, std::size_t lanes) {
    assert(mat.size() >= rows * cols && in.size() >= cols * lanes && out.size() >= rows * lanes);
    if (active_backend() == Backend::avx2) {
        avx2::batched_matvec(mat.data(), rows, cols, in.data(), out.data(), lanes);
    } else {
        scalar::batched_matvec(mat.data(), rows, cols, in.data(), out.data(), lanes);
    }
}

void blend_lanes(std::span<const std::uint8_t> select, std::uint8_t which,
                 std::span<const double> src, std::span<double> dst, std::size_t rows,
                 std::size_t lanes) {
    assert(select.size() >= lanes && src.size() >= rows * lanes && dst.size() >= rows * lanes);
    if (active_backend() == Backend::avx2) {
        avx2::blend_lanes(select.data(), which, src.data(), dst.data(), rows, lanes);
    } else {
        scalar::blend_lanes(select.data(), which, src.data(), dst.data(), rows, lanes);
    }
}

void lane_sum_squares(std::span<const double> in, std::size_t rows, std::span<double> out,
                      std::size_t lanes) {
    assert(in.size() >= rows * lanes && out.size() >= lanes);
    if (active_backend() == Backend::avx2) {
        avx2::lane_sum_squares(in.data(), rows, out.data(), lanes);
    } else {
        scalar::lane_sum_squares(in.data(), rows, out.data(), lanes);
    }
}

} // namespace wncs::kernels
