#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "anosov/lie.hpp"
#include "anosov/word.hpp"

namespace anosov {

// Free subgroup of SL(D) given by one matrix per generator letter.
// Generator i acts as raw[i]^pingpong_power.
template <int D> struct SchottkyPreset {
    std::string name = "unnamed";
    std::string provenance;
    int pingpong_power = 1;
    int check_length = 6;
    double regular_threshold = tol::regular_gap;
    std::vector<Mat<D>> raw;

    int rank() const { return static_cast<int>(raw.size()); }
    Alphabet alphabet() const { return Alphabet(rank()); }

    // Effective generators and their exact inverses, indexed by letter.
    std::vector<GroupElement<D>> letters() const {
        std::vector<GroupElement<D>> out;
        for (const Mat<D>& m : raw) {
            GroupElement<D> g(m);
            GroupElement<D> p;
            for (int k = 0; k < pingpong_power; ++k) p = p * g;
            out.push_back(p);
            out.push_back(p.inverse());
        }
        return out;
    }
};

namespace detail {

template <int D> using MatL = Eigen::Matrix<long double, D, D>;

}  // namespace detail

// Matrix of a word. Products longer than 20 letters are accumulated in long double.
template <int D> GroupElement<D> evaluate(const std::vector<GroupElement<D>>& gens, const Word& w) {
    if (w.size() <= 20) {
        GroupElement<D> g;
        for (Letter l : w.letters()) g = g * gens.at(l);
        return g;
    }
    detail::MatL<D> m = detail::MatL<D>::Identity(), inv = detail::MatL<D>::Identity();
    for (Letter l : w.letters()) {
        m = m * gens.at(l).matrix().template cast<long double>();
        inv = gens.at(l).inverse_matrix().template cast<long double>() * inv;
    }
    return GroupElement<D>::trusted(m.template cast<double>(), inv.template cast<double>());
}

template <int D> GroupElement<D> evaluate(const SchottkyPreset<D>& preset, const Word& w) {
    return evaluate(preset.letters(), w);
}

// Attracting flags y_l of each letter, indexed by letter.
template <int D> std::vector<Flag<D>> letter_attracting_flags(const std::vector<GroupElement<D>>& gens) {
    std::vector<Flag<D>> out;
    for (const auto& g : gens) out.push_back(attracting_flag(g));
    return out;
}

// Approximation of the limit flag zeta(x) at depth T: x_1 ... x_{T-1} y_{x_T}.
// Applied letter by letter so no large matrix is ever formed.
template <int D>
Flag<D> limit_flag(const std::vector<GroupElement<D>>& gens, const std::vector<Flag<D>>& attracting, const Word& x,
                   std::size_t depth) {
    std::size_t T = std::min(depth, x.size());
    if (T == 0) throw InputError("limit flag needs a nonempty boundary word");
    Flag<D> f = attracting.at(x[T - 1]);
    for (std::size_t i = T - 1; i-- > 0;) f = flag_action(gens.at(x[i]), f);
    return f;
}

// Limit map of the preset evaluated on boundary words, with the Iwasawa cocycle of
// word prefixes accumulated letter by letter.
template <int D> class LimitMap {
public:
    explicit LimitMap(const SchottkyPreset<D>& preset)
        : gens_(preset.letters()), attracting_(letter_attracting_flags(gens_)) {}
    LimitMap(std::vector<GroupElement<D>> gens)
        : gens_(std::move(gens)), attracting_(letter_attracting_flags(gens_)) {}

    const std::vector<GroupElement<D>>& generators() const { return gens_; }

    Flag<D> operator()(const Word& x, std::size_t depth) const { return limit_flag(gens_, attracting_, x, depth); }
    Flag<D> operator()(const BoundaryWord& x, std::size_t depth) const { return (*this)(x.prefix, depth); }

    // sigma(w, xi) = sum_i sigma(w_i, w_{i+1} ... w_n xi).
    CartanVector<D> sigma(const Word& w, const Flag<D>& xi) const {
        Flag<D> f = xi;
        CartanVector<D> total;
        for (std::size_t i = w.size(); i-- > 0;) {
            const auto& g = gens_[w[i]];
            Mat<D> q;
            total += CartanVector<D>::project(log_r_diagonal<D>(g.matrix() * f.frame(), &q));
            f = Flag<D>(q);
        }
        return total;
    }

    // Suffix flags f_c = zeta(x_c x_{c+1} ...) and prefix cocycles s_c = sigma(x_0 ... x_{c-1}, f_c),
    // c = 0..T-1, from one backward pass.
    struct Track {
        Word word;
        std::vector<Flag<D>> suffix;
        std::vector<CartanVector<D>> sigma;
    };
    Track track(const Word& x, std::size_t depth) const {
        std::size_t T = std::min(depth, x.size());
        if (T == 0) throw InputError("limit flag needs a nonempty boundary word");
        Track t;
        t.word = x.prefix(T);
        t.suffix.resize(T);
        std::vector<CartanVector<D>> step(T);
        t.suffix[T - 1] = attracting_.at(x[T - 1]);
        for (std::size_t i = T - 1; i-- > 0;) {
            Mat<D> q;
            step[i] = CartanVector<D>::project(log_r_diagonal<D>(gens_[x[i]].matrix() * t.suffix[i + 1].frame(), &q));
            t.suffix[i] = Flag<D>(q);
        }
        t.sigma.resize(T);
        for (std::size_t c = 1; c < T; ++c) t.sigma[c] = t.sigma[c - 1] + step[c - 1];
        return t;
    }

    // G(zeta(x), zeta(y)) through the common prefix w: G(w x', w y') = G(x', y') + sigma(w, x') + i sigma(w, y').
    // The split keeps every pairing minor of order one.
    static CartanVector<D> gromov(const Track& x, const Track& y) {
        std::size_t c = word_gromov_product(x.word, y.word);
        if (c >= std::min(x.word.size(), y.word.size())) throw InputError("boundary words agree up to the depth");
        return gromov_product(x.suffix[c], y.suffix[c]) + x.sigma[c] + y.sigma[c].opposition();
    }
    CartanVector<D> gromov(const Word& x, const Word& y, std::size_t depth) const {
        return gromov(track(x, depth), track(y, depth));
    }

private:
    std::vector<GroupElement<D>> gens_;
    std::vector<Flag<D>> attracting_;
};

// Minimal transversality margin between attracting flags of distinct letters.
template <int D> double letter_flag_margin(const std::vector<GroupElement<D>>& gens) {
    auto ys = letter_attracting_flags(gens);
    double m = 1.0;
    for (std::size_t i = 0; i < ys.size(); ++i)
        for (std::size_t j = 0; j < ys.size(); ++j)
            if (i != j) m = std::min(m, transversality_margin(ys[i], ys[j]));
    return m;
}

struct PresetCheck {
    bool ok = true;
    std::string failing_word;
    std::string reason;
    double min_loxodromic_gap = 0;  // min alpha(lambda) over checked words
    double min_regular_gap = 0;     // min alpha(mu)
    double growth_ratio = 0;        // min ||mu(w)|| / (|w| * min_l ||mu(l)||) at |w| = check_length
};

// Checks every nonempty reduced word up to the check length.
template <int D> PresetCheck check_preset(const SchottkyPreset<D>& preset, double growth_floor = 0.0) {
    PresetCheck out;
    out.min_loxodromic_gap = out.min_regular_gap = out.growth_ratio = std::numeric_limits<double>::infinity();
    auto gens = preset.letters();
    BallIndexer ball(preset.rank(), preset.check_length);
    double min_letter = std::numeric_limits<double>::infinity();
    for (const auto& g : gens) min_letter = std::min(min_letter, cartan_projection(g).norm());
    std::vector<GroupElement<D>> level(ball.size());
    for (std::size_t i = 1; i < ball.size(); ++i) {
        Word w = ball.unrank(i);
        level[i] = level[ball.parent(i)] * gens[w.back()];
        auto track = ExteriorTrack<D>::of(level[i]);
        auto mu = cartan_projection(track);
        // conjugates share lambda with their cyclically reduced core, checked on its own
        bool cyclic = w.size() == 1 || w[0] != inverse_letter(w.back());
        bool lox = true;
        if (cyclic) {
            auto lam = jordan_projection(track);
            out.min_loxodromic_gap = std::min(out.min_loxodromic_gap, lam.min_simple_root());
            lox = is_loxodromic(lam);
        }
        out.min_regular_gap = std::min(out.min_regular_gap, mu.min_simple_root());
        if (static_cast<int>(w.size()) == preset.check_length)
            out.growth_ratio = std::min(out.growth_ratio, mu.norm() / (w.size() * min_letter));
        if (out.ok && !lox) {
            out.ok = false;
            out.failing_word = w.str();
            out.reason = "word is not loxodromic";
        } else if (out.ok && mu.min_simple_root() < preset.regular_threshold) {
            out.ok = false;
            out.failing_word = w.str();
            out.reason = "word is not regular";
        }
    }
    if (out.ok && out.growth_ratio < growth_floor) {
        out.ok = false;
        out.reason = "orbit growth below the ping-pong floor";
    }
    return out;
}

template <int D> void validate_preset(const SchottkyPreset<D>& preset) {
    if (preset.raw.empty()) throw PresetIntegrityError("preset has no generators");
    if (preset.pingpong_power < 1) throw PresetIntegrityError("pingpong_power must be positive");
    for (const auto& m : preset.raw) {
        try {
            GroupElement<D> g(m);
        } catch (const InputError& e) {
            throw PresetIntegrityError(std::string("bad generator: ") + e.what());
        }
    }
    auto c = check_preset(preset);
    if (!c.ok) throw PresetIntegrityError(c.reason + ": " + c.failing_word);
}

struct PresetRecipe {
    int rank = 2;
    unsigned long long seed = 1;
    int draws = 64;
    int check_length = 6;
    int max_power = 12;
    double growth_floor = 0.8;
};

// Random-rotation conjugates of exp(diag(D-1, D-3, ..., 1-D)/2); the best of `draws`
// conjugator sets by letter-flag margin, then the smallest power passing the check.
template <int D> SchottkyPreset<D> make_schottky_preset(const PresetRecipe& recipe, const std::string& name) {
    std::mt19937_64 rng(recipe.seed);
    Vec<D> logs;
    for (int i = 0; i < D; ++i) logs(i) = 0.5 * (D - 1 - 2 * i);
    Mat<D> base = logs.array().exp().matrix().asDiagonal();
    SchottkyPreset<D> best;
    double best_margin = -1;
    for (int t = 0; t < recipe.draws; ++t) {
        SchottkyPreset<D> p;
        for (int i = 0; i < recipe.rank; ++i) {
            Mat<D> k = random_rotation<D>(rng);
            p.raw.push_back(k * base * k.transpose());
        }
        double m = letter_flag_margin(p.letters());
        if (m > best_margin) {
            best_margin = m;
            best = p;
        }
    }
    best.name = name;
    best.check_length = recipe.check_length;
    best.provenance = "generated: seed " + std::to_string(recipe.seed) + ", draws " + std::to_string(recipe.draws);
    for (int m = 1; m <= recipe.max_power; ++m) {
        best.pingpong_power = m;
        if (check_preset(best, recipe.growth_floor).ok) return best;
    }
    throw PresetIntegrityError("no ping-pong power up to the limit passes the check");
}

}  // namespace anosov
