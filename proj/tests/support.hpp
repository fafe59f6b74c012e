#pragma once

#include <random>

#include "anosov/lie.hpp"
#include "anosov/schottky.hpp"

namespace support {

using Rng = std::mt19937_64;

template <int D> anosov::GroupElement<D> random_element(Rng& rng, double spread = 1.0) {
    return anosov::GroupElement<D>::trusted(anosov::random_unimodular<D>(rng, spread));
}

template <int D> anosov::Flag<D> random_flag(Rng& rng) {
    return anosov::Flag<D>(anosov::random_rotation<D>(rng));
}

template <int D> anosov::GroupElement<D> random_loxodromic(Rng& rng) {
    for (;;) {
        auto g = random_element<D>(rng);
        if (anosov::jordan_projection(g).min_simple_root() > 1e-2) return g;
    }
}

template <int D> anosov::CartanVector<D> random_cartan(Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    anosov::Vec<D> v;
    for (int i = 0; i < D; ++i) v(i) = n(rng);
    return anosov::CartanVector<D>::project(v);
}

template <int D> double max_abs(const anosov::CartanVector<D>& v) { return v.coords().cwiseAbs().maxCoeff(); }

// Default desk preset: rank 2 in SL(3), seed 1.
inline const anosov::SchottkyPreset<3>& preset3() {
    static const auto p = anosov::make_schottky_preset<3>(anosov::PresetRecipe{}, "sl3_rank2");
    return p;
}

inline const anosov::SchottkyPreset<2>& preset2() {
    static const auto p = anosov::make_schottky_preset<2>(anosov::PresetRecipe{}, "sl2_rank2");
    return p;
}

// One regular diagonal conjugated by a fixed rotation: a cyclic group.
template <int D> anosov::SchottkyPreset<D> cyclic_preset(unsigned long long seed = 5) {
    Rng rng(seed);
    anosov::Vec<D> logs;
    for (int i = 0; i < D; ++i) logs(i) = 0.7 * (D - 1 - 2 * i);
    anosov::Mat<D> k = anosov::random_rotation<D>(rng);
    anosov::SchottkyPreset<D> p;
    p.name = "cyclic";
    p.raw.push_back(k * anosov::Mat<D>(logs.array().exp().matrix().asDiagonal()) * k.transpose());
    return p;
}

}  // namespace support
