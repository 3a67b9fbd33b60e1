#include "kmdp/common.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace kmdp {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t Rng::next_u64() {
    return splitmix64(state_);
}

double Rng::uniform() {
    // 53 mantissa bits -> uniform on [0, 1).
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) throw InputError("uniform_int: n must be positive");
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 in (0, 1] so the log is finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

Vector Rng::normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
}

std::uint64_t hash64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

Rng derive_stream(std::uint64_t master_seed, std::string_view name, std::uint64_t index) {
    std::uint64_t seed = hash_mix(hash_mix(master_seed, hash64(name)), index);
    return Rng(seed);
}

Box::Box(Vector lo_in, Vector hi_in) : lo(std::move(lo_in)), hi(std::move(hi_in)) {
    if (lo.size() != hi.size()) throw InputError("Box: lo/hi dimension mismatch");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (!(lo[i] <= hi[i])) throw InputError("Box: lo must be <= hi componentwise");
    }
}

Box Box::cube(int dim, double lo, double hi) {
    return Box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

Vector Box::clip(const Vector& v) const {
    if (v.size() != lo.size()) throw InputError("Box::clip: dimension mismatch");
    return v.cwiseMax(lo).cwiseMin(hi);
}

bool Box::contains(const Vector& v, double tol) const {
    if (v.size() != lo.size()) return false;
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (v[i] < lo[i] - tol || v[i] > hi[i] + tol) return false;
    }
    return true;
}

double Box::max_sq_norm() const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        total += std::max(lo[i] * lo[i], hi[i] * hi[i]);
    }
    return total;
}

Vector Box::sample(Rng& rng) const {
    Vector v(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) v[i] = rng.uniform(lo[i], hi[i]);
    return v;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw IoError("parse_double: bad number '" + s + "'");
    return v;
}

} // namespace kmdp
