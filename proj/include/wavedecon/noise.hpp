#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace wavedecon {

/// Centered Laplace density (2 sigma)^-1 exp(-|x| / sigma); F(g)(t) = 1 / (1 + sigma^2 t^2).
struct LaplaceNoise {
    double scale = 0.0;
};

/// Gamma(shape, scale) density; F(g)(t) = (1 + i scale t)^-shape.
struct GammaNoise {
    double shape = 1.0;
    double scale = 1.0;
};

/// No covariate noise; F(g) = 1.
struct DiracNoise {};

using NoiseComponent = std::variant<DiracNoise, LaplaceNoise, GammaNoise>;

/// F(g)(t) = int e^{-ity} g(y) dy for a single axis.
inline std::complex<double> noise_ft(const NoiseComponent& c, double t) {
    struct Visitor {
        double t;
        std::complex<double> operator()(const DiracNoise&) const { return 1.0; }
        std::complex<double> operator()(const LaplaceNoise& n) const {
            return 1.0 / (1.0 + n.scale * n.scale * t * t);
        }
        std::complex<double> operator()(const GammaNoise& n) const {
            return std::pow(std::complex<double>(1.0, n.scale * t), -n.shape);
        }
    };
    return std::visit(Visitor{t}, c);
}

/// 1 / F(g)(t), computed without forming the reciprocal of a tiny number
/// where a closed form exists.
inline std::complex<double> inverse_noise_ft(const NoiseComponent& c, double t) {
    if (const auto* l = std::get_if<LaplaceNoise>(&c)) return 1.0 + l->scale * l->scale * t * t;
    if (std::holds_alternative<DiracNoise>(c)) return 1.0;
    const auto& g = std::get<GammaNoise>(c);
    return std::pow(std::complex<double>(1.0, g.scale * t), g.shape);
}

/// Degree of ill-posedness nu: |F(g)(t)| ~ (1 + |t|)^-nu.
inline double ill_posedness(const NoiseComponent& c) {
    if (std::holds_alternative<LaplaceNoise>(c)) return 2.0;
    if (const auto* g = std::get_if<GammaNoise>(&c)) return g->shape;
    return 0.0;
}

inline std::string describe(const NoiseComponent& c) {
    auto num = [](double v) {
        char buf[32];
        return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
    };
    if (const auto* l = std::get_if<LaplaceNoise>(&c)) return "laplace:" + num(l->scale);
    if (const auto* g = std::get_if<GammaNoise>(&c)) return "gamma:" + num(g->shape) + ":" + num(g->scale);
    return "dirac";
}

/// Parses "dirac", "laplace:<scale>" or "gamma:<shape>:<scale>".
inline NoiseComponent parse_noise_component(std::string_view spec) {
    auto number = [&](std::string_view s) {
        std::string buf(s);
        char* end = nullptr;
        const double v = std::strtod(buf.c_str(), &end);
        if (buf.empty() || end != buf.c_str() + buf.size() || !(v > 0.0) || !std::isfinite(v))
            throw ConfigError("bad noise parameter '" + buf + "' in '" + std::string(spec) + "'");
        return v;
    };
    if (spec == "dirac" || spec == "none") return DiracNoise{};
    if (spec.starts_with("laplace:")) return LaplaceNoise{number(spec.substr(8))};
    if (spec.starts_with("gamma:")) {
        auto rest = spec.substr(6);
        auto colon = rest.find(':');
        if (colon == std::string_view::npos) throw ConfigError("gamma noise needs shape:scale");
        return GammaNoise{number(rest.substr(0, colon)), number(rest.substr(colon + 1))};
    }
    throw ConfigError("unknown noise spec '" + std::string(spec) + "'");
}

/// Product-form covariate noise g = g_1 x ... x g_d.
class NoiseModel {
public:
    NoiseModel() = default;
    explicit NoiseModel(std::vector<NoiseComponent> axes) : axes_(std::move(axes)) {
        for (const auto& a : axes_) {
            if (const auto* l = std::get_if<LaplaceNoise>(&a); l && !(l->scale > 0.0))
                throw ConfigError("Laplace scale must be positive");
            if (const auto* g = std::get_if<GammaNoise>(&a); g && !(g->shape > 0.0 && g->scale > 0.0))
                throw ConfigError("Gamma shape and scale must be positive");
        }
    }

    /// Same component on every axis.
    static NoiseModel isotropic(const NoiseComponent& c, std::size_t dim) {
        return NoiseModel(std::vector<NoiseComponent>(dim, c));
    }

    /// Comma-separated per-axis specs; a single spec is broadcast to `dim` axes.
    static NoiseModel parse(std::string_view spec, std::size_t dim) {
        std::vector<NoiseComponent> axes;
        std::size_t start = 0;
        while (start <= spec.size()) {
            auto comma = spec.find(',', start);
            if (comma == std::string_view::npos) comma = spec.size();
            axes.push_back(parse_noise_component(spec.substr(start, comma - start)));
            start = comma + 1;
        }
        if (axes.size() == 1 && dim > 1) return isotropic(axes.front(), dim);
        if (axes.size() != dim)
            throw ConfigError("noise spec has " + std::to_string(axes.size()) + " axes, data has " +
                              std::to_string(dim));
        return NoiseModel(std::move(axes));
    }

    std::size_t dim() const { return axes_.size(); }
    const NoiseComponent& axis(std::size_t l) const { return axes_.at(l); }
    std::complex<double> ft(std::size_t l, double t) const { return noise_ft(axes_.at(l), t); }

    /// Overall nu, the maximum over axes.
    double nu() const {
        double v = 0.0;
        for (const auto& a : axes_) v = std::max(v, ill_posedness(a));
        return v;
    }

    std::string describe() const {
        std::string s;
        for (std::size_t l = 0; l < axes_.size(); ++l) {
            if (l) s += ",";
            s += wavedecon::describe(axes_[l]);
        }
        return s;
    }

private:
    std::vector<NoiseComponent> axes_;
};

}  // namespace wavedecon
