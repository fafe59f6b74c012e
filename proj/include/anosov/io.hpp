#pragma once

// Serialization: key=value run configs, preset / measure / certificate JSON and table CSV.
// Needs json.hpp (nlohmann) on the include path.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "anosov/measure.hpp"
#include "anosov/orbit.hpp"
#include "anosov/schottky.hpp"

namespace anosov::io {

using json = nlohmann::json;

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x == 0 ? 0.0 : x);
    return buf;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingInputError("cannot write " + path);
    out << text;
}

// ---------------------------------------------------------------- run config

// Flat key = value text. '#' starts a comment; later assignments replace earlier ones.
class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "config") {
        Config c;
        std::istringstream in(text);
        std::string line;
        int n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
            if (trim(line).empty()) continue;
            c.assign(line, origin + ":" + std::to_string(n));
        }
        return c;
    }
    static Config load(const std::string& path) { return parse(read_file(path), path); }

    // "key=value" from the command line.
    void assign(const std::string& entry, const std::string& where = "override") {
        auto eq = entry.find('=');
        if (eq == std::string::npos) throw InputError(where + ": expected key=value");
        std::string k = trim(entry.substr(0, eq));
        if (k.empty()) throw InputError(where + ": empty key");
        values_[k] = trim(entry.substr(eq + 1));
    }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void merge(const Config& over) {
        for (const auto& [k, v] : over.values_) values_[k] = v;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get(const std::string& key, const std::string& fallback = "") const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }
    double get_double(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        try {
            std::size_t pos = 0;
            double v = std::stod(get(key), &pos);
            if (pos != get(key).size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw InputError("config key " + key + " is not a number: " + get(key));
        }
    }
    long long get_int(const std::string& key, long long fallback) const {
        if (!has(key)) return fallback;
        try {
            std::size_t pos = 0;
            long long v = std::stoll(get(key), &pos);
            if (pos != get(key).size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw InputError("config key " + key + " is not an integer: " + get(key));
        }
    }

    const std::map<std::string, std::string>& values() const { return values_; }

    std::string canonical() const {
        std::string s;
        for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
        return s;
    }
    // Hash of the canonical form without the output destination.
    std::string hash() const {
        Config c = *this;
        c.values_.erase("out");
        return hex64(fnv1a64(c.canonical()));
    }

private:
    static std::string trim(const std::string& s) {
        auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }
    std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------- matrices and vectors

template <int D> json matrix_json(const Mat<D>& m) {
    json rows = json::array();
    for (int i = 0; i < D; ++i) {
        json row = json::array();
        for (int j = 0; j < D; ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

template <int D> Mat<D> matrix_from_json(const json& j) {
    if (!j.is_array() || static_cast<int>(j.size()) != D) throw InputError("matrix has wrong row count");
    Mat<D> m;
    for (int i = 0; i < D; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<int>(row.size()) != D) throw InputError("matrix has wrong column count");
        for (int k = 0; k < D; ++k) {
            if (!row[static_cast<std::size_t>(k)].is_number()) throw InputError("matrix entry is not a number");
            m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
        }
    }
    return m;
}

template <int D> json vector_json(const Vec<D>& v) {
    json a = json::array();
    for (int i = 0; i < D; ++i) a.push_back(v(i));
    return a;
}

template <int D> Vec<D> vector_from_json(const json& j) {
    if (!j.is_array() || static_cast<int>(j.size()) != D) throw InputError("vector has wrong length");
    Vec<D> v;
    for (int i = 0; i < D; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

// ---------------------------------------------------------------- presets

// {name, provenance, dim, pingpong_power, check_length, regular_threshold, letters, matrices}.
// letters[i] names generator i; its inverse is the upper-case symbol.
template <int D> json preset_json(const SchottkyPreset<D>& p) {
    json j;
    j["name"] = p.name;
    j["provenance"] = p.provenance;
    j["dim"] = D;
    j["pingpong_power"] = p.pingpong_power;
    j["check_length"] = p.check_length;
    j["regular_threshold"] = p.regular_threshold;
    j["letters"] = json::array();
    j["matrices"] = json::array();
    for (int i = 0; i < p.rank(); ++i) {
        j["letters"].push_back(std::string(1, Alphabet::symbol(static_cast<Letter>(2 * i))));
        j["matrices"].push_back(matrix_json<D>(p.raw[static_cast<std::size_t>(i)]));
    }
    return j;
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(what + " is not valid JSON: " + e.what());
    }
}

inline int preset_dimension(const json& j) {
    if (!j.is_object() || !j.contains("dim") || !j["dim"].is_number_integer())
        throw PresetIntegrityError("preset has no integer dim");
    return j["dim"].get<int>();
}

// Structural checks only; the ping-pong check runs in validate_preset.
template <int D> SchottkyPreset<D> preset_from_json(const json& j) {
    try {
        if (preset_dimension(j) != D) throw PresetIntegrityError("preset dimension mismatch");
        SchottkyPreset<D> p;
        p.name = j.value("name", std::string("unnamed"));
        p.provenance = j.value("provenance", std::string());
        p.pingpong_power = j.at("pingpong_power").get<int>();
        p.check_length = j.value("check_length", 6);
        p.regular_threshold = j.value("regular_threshold", tol::regular_gap);
        const json& ms = j.at("matrices");
        const json& ls = j.at("letters");
        if (!ms.is_array() || ms.empty()) throw PresetIntegrityError("preset has no matrices");
        if (!ls.is_array() || ls.size() != ms.size()) throw PresetIntegrityError("letters do not match matrices");
        for (std::size_t i = 0; i < ls.size(); ++i) {
            std::string expect(1, Alphabet::symbol(static_cast<Letter>(2 * i)));
            if (ls[i] != expect) throw PresetIntegrityError("letter " + std::to_string(i) + " must be " + expect);
        }
        for (const auto& m : ms) p.raw.push_back(matrix_from_json<D>(m));
        return p;
    } catch (const json::exception& e) {
        throw PresetIntegrityError(std::string("malformed preset: ") + e.what());
    } catch (const InputError& e) {
        throw PresetIntegrityError(std::string("malformed preset: ") + e.what());
    }
}

// ---------------------------------------------------------------- orbit tables

template <int D> std::string table_csv_header() {
    std::string s = "word,word_len";
    for (int i = 1; i <= D; ++i) s += ",mu_" + std::to_string(i);
    for (int i = 1; i <= D; ++i) s += ",lam_" + std::to_string(i);
    return s + "\n";
}

// One row per table element in length-lex order; the identity has an empty word.
template <int D> std::string table_csv(const OrbitTable<D>& t) {
    std::string s = table_csv_header<D>();
    for (std::size_t i = 0; i < t.size(); ++i) {
        s += t.word(i).str() + "," + std::to_string(t.length(i));
        for (int k = 0; k < D; ++k) s += "," + fmt17(t.mu(i)[k]);
        for (int k = 0; k < D; ++k) s += "," + fmt17(t.lam(i)[k]);
        s += "\n";
    }
    return s;
}

template <int D> struct TableRow {
    std::string word;
    int word_len = 0;
    Vec<D> mu;
    Vec<D> lam;
};

template <int D> std::vector<TableRow<D>> table_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line + "\n" != table_csv_header<D>()) throw InputError("unexpected table header");
    std::vector<TableRow<D>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (static_cast<int>(f.size()) != 2 + 2 * D) throw InputError("table row has wrong field count");
        TableRow<D> r;
        r.word = f[0];
        try {
            r.word_len = std::stoi(f[1]);
            for (int k = 0; k < D; ++k) {
                r.mu(k) = std::stod(f[static_cast<std::size_t>(2 + k)]);
                r.lam(k) = std::stod(f[static_cast<std::size_t>(2 + D + k)]);
            }
        } catch (const std::exception&) {
            throw InputError("table row has a malformed number");
        }
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------- measures

template <int D> json measure_json(const DiscreteMeasure<D>& nu) {
    json j;
    j["psi"] = vector_json<D>(nu.psi.coefficients());
    j["L"] = nu.max_len;
    j["floor"] = nu.floor;
    j["preset"] = nu.preset;
    j["atoms"] = json::array();
    for (const auto& a : nu.atoms) j["atoms"].push_back({{"frame", matrix_json<D>(a.flag.frame())}, {"weight", a.weight}});
    return j;
}

template <int D> DiscreteMeasure<D> measure_from_json(const json& j) {
    try {
        DiscreteMeasure<D> nu;
        nu.psi = LinearForm<D>(vector_from_json<D>(j.at("psi")));
        nu.max_len = j.at("L").get<int>();
        nu.floor = j.value("floor", 0);
        nu.preset = j.value("preset", std::string());
        for (const auto& a : j.at("atoms")) {
            Atom<D> atom;
            atom.flag = Flag<D>(matrix_from_json<D>(a.at("frame")));
            atom.weight = a.at("weight").get<double>();
            if (!(atom.weight >= 0)) throw InputError("negative atom weight");
            nu.total += atom.weight;
            nu.atoms.push_back(atom);
        }
        return nu;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed measure: ") + e.what());
    }
}

// ---------------------------------------------------------------- certificates

inline json certificate_json(const EssentialValueCertificate& c) {
    json j;
    j["found"] = c.found;
    j["gamma0"] = c.gamma0.str();
    j["conjugator"] = c.conjugator.str();
    j["target"] = c.target;
    j["epsilon"] = c.epsilon;
    j["set_mass"] = c.set_mass;
    j["max_busemann_deviation"] = c.max_busemann_deviation;
    j["ball_radius"] = c.ball_radius;
    j["atoms"] = c.atoms;
    j["conjugators_tried"] = c.conjugators_tried;
    j["best_deviation"] = std::isfinite(c.best_deviation) ? json(c.best_deviation) : json(nullptr);
    return j;
}

inline EssentialValueCertificate certificate_from_json(const json& j, const Alphabet& ab) {
    try {
        EssentialValueCertificate c;
        c.found = j.at("found").get<bool>();
        c.gamma0 = Word::parse(j.at("gamma0").get<std::string>(), ab);
        c.conjugator = Word::parse(j.at("conjugator").get<std::string>(), ab);
        c.target = j.at("target").get<std::vector<double>>();
        c.epsilon = j.at("epsilon").get<double>();
        c.set_mass = j.at("set_mass").get<double>();
        c.max_busemann_deviation = j.at("max_busemann_deviation").get<double>();
        c.ball_radius = j.at("ball_radius").get<double>();
        c.atoms = j.at("atoms").get<std::size_t>();
        c.conjugators_tried = j.value("conjugators_tried", std::size_t{0});
        if (j.contains("best_deviation") && j["best_deviation"].is_number())
            c.best_deviation = j["best_deviation"].get<double>();
        return c;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed certificate: ") + e.what());
    }
}

// ---------------------------------------------------------------- constant reports

struct ConstantReport {
    std::string lemma_id;
    double fitted_constant = 0;
    std::string witness;
    std::size_t sample_size = 0;
    double stability_ratio = 1;
};

inline json constant_report_json(const ConstantReport& r) {
    return {{"lemma_id", r.lemma_id},
            {"fitted_constant", std::isfinite(r.fitted_constant) ? json(r.fitted_constant) : json(nullptr)},
            {"witness", r.witness},
            {"sample_size", r.sample_size},
            {"stability_ratio", std::isfinite(r.stability_ratio) ? json(r.stability_ratio) : json(nullptr)}};
}

}  // namespace anosov::io
