#pragma once

// Dense row-major tensors (64-bit floats) and the seeded RNG used everywhere.
// Desk-scale sizes: no BLAS, no views, plain value semantics.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tigan {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void ensure(bool cond, const std::string& msg) {
    if (!cond) {
        throw Error(msg);
    }
}

// Like ensure(), but the message expression is only evaluated on failure.
// Needed on hot paths where the message concatenates strings.
#define TIGAN_ENSURE(cond, msg)              \
    do {                                     \
        if (!(cond)) {                       \
            throw ::tigan::Error(msg);       \
        }                                    \
    } while (0)

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) {
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

struct Tensor {
    Shape shape;
    std::vector<double> values;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0)
        : shape(std::move(s)), values(shape_numel(shape), fill) {}

    static Tensor matrix(std::size_t r, std::size_t c, double fill = 0.0) {
        return Tensor(Shape{r, c}, fill);
    }
    static Tensor scalar(double v) {
        Tensor t(Shape{1, 1});
        t.values[0] = v;
        return t;
    }
    static Tensor row(std::vector<double> v) {
        Tensor t;
        t.shape = {1, v.size()};
        t.values = std::move(v);
        return t;
    }

    std::size_t numel() const { return values.size(); }

    // Rank-2 accessors; rank-1 tensors are treated as a single row. The
    // library only builds tensors of rank 1 and 2.
    std::size_t rows() const noexcept { return shape.size() == 2 ? shape[0] : 1; }
    std::size_t cols() const noexcept { return shape.empty() ? 1 : shape.back(); }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : values) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    double item() const {
        TIGAN_ENSURE(numel() == 1,
                     "item() requires a single-element tensor, got " + shape_str(shape));
        return values[0];
    }
};

inline bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape && a.values == b.values;
}

// Deterministic RNG. Distributions are hand-rolled on top of mt19937_64 so the
// produced streams do not depend on the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
    }

    // Standard normal via Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Uniform integer in [0, n) without modulo bias.
    std::size_t uniform_index(std::size_t n) {
        ensure(n > 0, "uniform_index: empty range");
        std::uint64_t bound = n;
        std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % bound);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Mixes a base seed with a stream tag so the independent RNG streams used by
// init / training / sampling cannot collide.
inline std::uint64_t seed_stream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

}  // namespace tigan
