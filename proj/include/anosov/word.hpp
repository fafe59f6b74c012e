#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "anosov/error.hpp"

namespace anosov {

// Letter 2i is the i-th generator, letter 2i+1 its inverse.
using Letter = std::uint8_t;

inline Letter inverse_letter(Letter l) { return static_cast<Letter>(l ^ 1u); }

class Alphabet {
public:
    explicit Alphabet(int rank = 2) : rank_(rank) {
        if (rank < 1 || rank > 26) throw InputError("alphabet rank must be in 1..26");
    }
    int rank() const { return rank_; }
    int size() const { return 2 * rank_; }
    bool contains(Letter l) const { return l < size(); }

    static char symbol(Letter l) { return static_cast<char>((l & 1u) ? 'A' + l / 2 : 'a' + l / 2); }
    Letter parse(char c) const {
        int l;
        if (c >= 'a' && c <= 'z') l = 2 * (c - 'a');
        else if (c >= 'A' && c <= 'Z') l = 2 * (c - 'A') + 1;
        else throw InputError(std::string("unknown word symbol '") + c + "'");
        if (l >= size()) throw InputError(std::string("symbol outside alphabet '") + c + "'");
        return static_cast<Letter>(l);
    }
    friend bool operator==(const Alphabet&, const Alphabet&) = default;

private:
    int rank_;
};

// Reduced word in the free group.
class Word {
public:
    Word() = default;

    // Freely reduces an arbitrary letter sequence.
    static Word reduce(std::span<const Letter> raw) {
        Word w;
        for (Letter l : raw) w.push(l);
        return w;
    }
    static Word reduce(std::initializer_list<Letter> raw) {
        return reduce(std::span<const Letter>(raw.begin(), raw.size()));
    }
    static Word parse(std::string_view text, const Alphabet& alphabet) {
        std::vector<Letter> raw;
        for (char c : text) {
            if (c == ' ') continue;
            raw.push_back(alphabet.parse(c));
        }
        return reduce(raw);
    }
    static Word letter(Letter l) { return reduce({l}); }

    const std::vector<Letter>& letters() const { return letters_; }
    std::size_t size() const { return letters_.size(); }
    bool empty() const { return letters_.empty(); }
    Letter operator[](std::size_t i) const { return letters_[i]; }
    Letter back() const { return letters_.back(); }

    std::string str() const {
        std::string s;
        for (Letter l : letters_) s.push_back(Alphabet::symbol(l));
        return s;
    }

    Word inverse() const {
        Word w;
        for (auto it = letters_.rbegin(); it != letters_.rend(); ++it) w.letters_.push_back(inverse_letter(*it));
        return w;
    }
    Word prefix(std::size_t n) const {
        Word w;
        w.letters_.assign(letters_.begin(), letters_.begin() + static_cast<std::ptrdiff_t>(std::min(n, size())));
        return w;
    }
    Word suffix_from(std::size_t n) const {
        Word w;
        if (n < size()) w.letters_.assign(letters_.begin() + static_cast<std::ptrdiff_t>(n), letters_.end());
        return w;
    }
    Word operator*(const Word& o) const {
        Word w = *this;
        for (Letter l : o.letters_) w.push(l);
        return w;
    }
    Word power(int n) const {
        Word base = n >= 0 ? *this : inverse();
        Word w;
        for (int i = 0; i < std::abs(n); ++i) w = w * base;
        return w;
    }
    friend bool operator==(const Word&, const Word&) = default;
    friend auto operator<=>(const Word& a, const Word& b) {
        if (a.size() != b.size()) return a.size() <=> b.size();
        return a.letters_ <=> b.letters_;
    }

private:
    void push(Letter l) {
        if (!letters_.empty() && letters_.back() == inverse_letter(l)) letters_.pop_back();
        else letters_.push_back(l);
    }
    std::vector<Letter> letters_;
};

// Reduced infinite word truncated at depth T.
struct BoundaryWord {
    Word prefix;
    std::size_t depth() const { return prefix.size(); }

    // Uniformly random reduced continuation of `start` up to the given depth.
    template <class Rng>
    static BoundaryWord extend(const Word& start, std::size_t depth, const Alphabet& alphabet, Rng& rng) {
        std::vector<Letter> letters = start.letters();
        std::uniform_int_distribution<int> pick(0, alphabet.size() - 1);
        while (letters.size() < depth) {
            Letter l = static_cast<Letter>(pick(rng));
            if (!letters.empty() && l == inverse_letter(letters.back())) continue;
            letters.push_back(l);
        }
        return BoundaryWord{Word::reduce(letters)};
    }
    template <class Rng> static BoundaryWord random(std::size_t depth, const Alphabet& alphabet, Rng& rng) {
        return extend(Word(), depth, alphabet, rng);
    }
    // w w w ... truncated; w must be cyclically reduced.
    static BoundaryWord periodic(const Word& w, std::size_t depth) {
        if (w.empty()) throw InputError("periodic boundary word needs a nonempty word");
        if (w.size() > 1 && w[0] == inverse_letter(w.back())) throw InputError("word is not cyclically reduced");
        std::vector<Letter> letters;
        while (letters.size() < depth) letters.push_back(w[letters.size() % w.size()]);
        return BoundaryWord{Word::reduce(letters)};
    }
    // gamma x. The result is exact as a prefix as long as gamma does not
    // cancel the whole stored prefix.
    BoundaryWord translate(const Word& gamma) const {
        Word gi = gamma.inverse();
        std::size_t k = common_prefix_len(gi, prefix);
        if (k >= prefix.size() && !prefix.empty())
            throw InputError("boundary word too shallow for this translation");
        return BoundaryWord{gamma * prefix};
    }

private:
    static std::size_t common_prefix_len(const Word& a, const Word& b) {
        std::size_t n = std::min(a.size(), b.size()), i = 0;
        while (i < n && a[i] == b[i]) ++i;
        return i;
    }
};

inline std::size_t common_prefix(std::span<const Letter> a, std::span<const Letter> b) {
    std::size_t n = std::min(a.size(), b.size()), i = 0;
    while (i < n && a[i] == b[i]) ++i;
    return i;
}

// (x|y)_e: length of the longest common prefix of the reduced forms.
inline std::size_t word_gromov_product(const Word& x, const Word& y) { return common_prefix(x.letters(), y.letters()); }
inline std::size_t word_gromov_product(const BoundaryWord& x, const BoundaryWord& y) {
    return word_gromov_product(x.prefix, y.prefix);
}
inline std::size_t word_gromov_product(const Word& x, const BoundaryWord& y) { return word_gromov_product(x, y.prefix); }
inline std::size_t word_gromov_product(const BoundaryWord& x, const Word& y) { return word_gromov_product(x.prefix, y); }

inline std::size_t word_distance(const Word& a, const Word& b) {
    return a.size() + b.size() - 2 * word_gromov_product(a, b);
}

// Tree geodesic from g1 to g2: up to the common prefix, then down.
inline std::vector<Word> geodesic_segment(const Word& g1, const Word& g2) {
    std::size_t c = word_gromov_product(g1, g2);
    std::vector<Word> path;
    for (std::size_t n = g1.size(); n > c; --n) path.push_back(g1.prefix(n));
    for (std::size_t n = c; n <= g2.size(); ++n) path.push_back(g2.prefix(n));
    return path;
}

// Does the tree geodesic from g1 toward x pass within distance R of g2?
// The ray is followed only as deep as the truncated prefix of x.
inline bool word_shadow_membership(const BoundaryWord& x, const Word& g1, const Word& g2, std::size_t R) {
    const Word& xs = x.prefix;
    std::size_t c = word_gromov_product(g1, xs);
    auto dist_to_prefix = [&](const Word& base, std::size_t k) {
        std::size_t l = std::min(word_gromov_product(g2, base), k);
        return g2.size() + k - 2 * l;
    };
    // descending part: prefixes of x of length in [c, depth]
    std::size_t kx = std::clamp(word_gromov_product(g2, xs), c, xs.size());
    std::size_t best = dist_to_prefix(xs, kx);
    // ascending part: prefixes of g1 of length in [c, |g1|]
    std::size_t kg = std::clamp(word_gromov_product(g2, g1), c, g1.size());
    best = std::min(best, dist_to_prefix(g1, kg));
    return best <= R;
}

// Nearest point of the tree geodesic [x, y] to g, i.e. the median of (g, x, y).
inline Word projection_to_geodesic(const Word& g, const Word& x, const Word& y) {
    if (x == y) throw InputError("geodesic endpoints must differ");
    Word xi = x.inverse();
    Word u = xi * g, v = xi * y;
    return x * u.prefix(word_gromov_product(u, v));
}

// Length-lexicographic ranking of the ball of radius max_len.
class BallIndexer {
public:
    BallIndexer(int rank, int max_len) : rank_(rank), max_len_(max_len) {
        if (max_len < 0) throw InputError("negative word length");
        offsets_.push_back(0);
        offsets_.push_back(1);
        for (int l = 1; l <= max_len; ++l) offsets_.push_back(offsets_.back() + sphere(l));
    }
    int rank() const { return rank_; }
    int max_len() const { return max_len_; }
    std::size_t size() const { return offsets_[static_cast<std::size_t>(max_len_) + 1]; }
    std::size_t sphere(int len) const {
        if (len == 0) return 1;
        std::size_t s = static_cast<std::size_t>(2 * rank_);
        for (int i = 1; i < len; ++i) s *= static_cast<std::size_t>(2 * rank_ - 1);
        return s;
    }
    // first index of words of the given length
    std::size_t offset(int len) const { return offsets_[static_cast<std::size_t>(len)]; }

    std::size_t rank_of(std::span<const Letter> w) const {
        if (static_cast<int>(w.size()) > max_len_) throw InputError("word longer than the ball");
        std::size_t code = 0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            std::size_t digit = w[i];
            if (i > 0) {
                Letter forbidden = inverse_letter(w[i - 1]);
                if (w[i] == forbidden) throw InputError("word is not reduced");
                if (w[i] > forbidden) --digit;
                code = code * static_cast<std::size_t>(2 * rank_ - 1) + digit;
            } else {
                code = digit;
            }
        }
        return offset(static_cast<int>(w.size())) + code;
    }
    std::size_t rank_of(const Word& w) const { return rank_of(std::span<const Letter>(w.letters())); }

    Word unrank(std::size_t index) const {
        int len = 0;
        while (len < max_len_ && index >= offset(len + 1)) ++len;
        std::size_t code = index - offset(len);
        std::vector<std::size_t> digits(static_cast<std::size_t>(len));
        for (int i = len - 1; i >= 1; --i) {
            digits[static_cast<std::size_t>(i)] = code % static_cast<std::size_t>(2 * rank_ - 1);
            code /= static_cast<std::size_t>(2 * rank_ - 1);
        }
        std::vector<Letter> letters;
        if (len > 0) letters.push_back(static_cast<Letter>(code));
        for (int i = 1; i < len; ++i) {
            Letter forbidden = inverse_letter(letters.back());
            std::size_t d = digits[static_cast<std::size_t>(i)];
            Letter l = static_cast<Letter>(d >= forbidden ? d + 1 : d);
            letters.push_back(l);
        }
        return Word::reduce(letters);
    }
    // index of the word with its last letter removed
    std::size_t parent(std::size_t index) const {
        Word w = unrank(index);
        return rank_of(w.prefix(w.size() - 1));
    }

private:
    int rank_;
    int max_len_;
    std::vector<std::size_t> offsets_;
};

}  // namespace anosov
