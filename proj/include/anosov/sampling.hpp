#pragma once

#include <random>

#include "anosov/lie.hpp"

namespace anosov {

template <int D, class Rng> GroupElement<D> random_element(Rng& rng, double spread = 1.0) {
    return GroupElement<D>::trusted(random_unimodular<D>(rng, spread));
}

template <int D, class Rng> Flag<D> random_flag(Rng& rng) { return Flag<D>(random_rotation<D>(rng)); }

// Random element whose Jordan projection has every simple root above `gap`.
template <int D, class Rng> GroupElement<D> random_loxodromic(Rng& rng, double gap = 1e-2) {
    for (;;) {
        auto g = random_element<D>(rng);
        if (jordan_projection(g).min_simple_root() > gap) return g;
    }
}

template <int D, class Rng> LinearForm<D> random_form(Rng& rng) {
    std::normal_distribution<double> n;
    Vec<D> v;
    for (int i = 0; i < D; ++i) v(i) = n(rng);
    return LinearForm<D>(v);
}

template <int D> double max_abs(const CartanVector<D>& v) { return v.coords().cwiseAbs().maxCoeff(); }

}  // namespace anosov
