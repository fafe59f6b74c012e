#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "anosov/anosov.hpp"
#include "anosov/io.hpp"

using namespace anosov;
using io::json;

namespace {

enum Exit { exit_ok = 0, exit_suite = 1, exit_resource = 2, exit_input = 3 };

const std::map<std::string, std::string> defaults{
    {"preset", "builtin:sl3_rank2"}, {"max_len", "8"},   {"seed", "1"},      {"psi", "tangent-scan"},
    {"suite", "all"},                {"depth", "32"},    {"eps", "0.5"},     {"theta", "0.05"},
    {"tol", "0.05"},                 {"targets", "100"}, {"samples", "200"}, {"threads", "0"},
};

struct Run {
    std::string command;
    io::Config cfg;

    std::string get(const std::string& k) const { return cfg.get(k); }
    int max_len() const { return static_cast<int>(cfg.get_int("max_len", 8)); }
    unsigned long long seed() const { return static_cast<unsigned long long>(cfg.get_int("seed", 1)); }
    std::size_t count(const std::string& k) const {
        long long v = cfg.get_int(k, 0);
        if (v < 0) throw InputError(k + " must be nonnegative");
        return static_cast<std::size_t>(v);
    }
};

void emit(const Run& run, const std::string& text) {
    std::string out = run.get("out");
    if (out.empty() || out == "-") std::cout << text;
    else io::write_file(out, text);
}

json envelope(const Run& run) {
    json j;
    j["command"] = run.command;
    j["config_hash"] = run.cfg.hash();
    j["seed"] = run.seed();
    return j;
}

void emit_json(const Run& run, const json& j) { emit(run, j.dump(2) + "\n"); }

template <int D> json cartan_json(const CartanVector<D>& v) { return io::vector_json<D>(v.coords()); }

template <int D> Vec<D> parse_coefficients(const std::string& text) {
    std::vector<double> xs;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            xs.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw InputError("bad coefficient '" + tok + "'");
        }
    }
    if (static_cast<int>(xs.size()) != D) throw InputError("expected " + std::to_string(D) + " comma-separated coefficients");
    Vec<D> v;
    for (int i = 0; i < D; ++i) v(i) = xs[static_cast<std::size_t>(i)];
    return v;
}

// ---------------------------------------------------------------- per-dimension commands

template <int D> class Commands {
public:
    Commands(const Run& run, SchottkyPreset<D> preset) : run_(run), ctx_(std::move(preset), run.max_len(), run.seed()) {
        ctx_.depth = run.count("depth");
        ctx_.threads = static_cast<unsigned>(run.count("threads"));
        if (run.cfg.has("cap")) ctx_.sphere_cap = run.count("cap");
        if (run.get("psi") != "tangent-scan") ctx_.psi = LinearForm<D>(parse_coefficients<D>(run.get("psi")));
    }

    int dispatch() {
        const std::string& c = run_.command;
        if (c == "verify") return verify();
        validate_preset(ctx_.preset());
        if (c == "enumerate") return enumerate();
        if (c == "limit-cone") return limit_cone();
        if (c == "growth") return growth();
        if (c == "exponent") return exponent();
        if (c == "ps-build") return ps_build();
        if (c == "metric") return metric();
        if (c == "shadow") return shadow();
        if (c == "essential") return essential();
        if (c == "myrberg") return myrberg();
        if (c == "limitset") return limitset();
        throw InputError("unknown command " + c);
    }

private:
    const Run& run_;
    SuiteContext<D> ctx_;

    const OrbitTable<D>& table() { return ctx_.table(); }

    // Explicit coefficients are used as given; the tangent scan is rescaled to its balanced exponent.
    LinearForm<D> form() {
        if (ctx_.psi && run_.cfg.get("psi_exact", "0") == "1") return *ctx_.psi;
        return ctx_.balanced(table());
    }

    int enumerate() {
        emit(run_, io::table_csv(table()));
        std::cerr << "enumerated " << table().size() << " elements up to length " << table().max_len() << "\n";
        return exit_ok;
    }

    int limit_cone() {
        auto c = limit_cone_estimate(table(), std::max(1, table().max_len() / 2));
        json j = envelope(run_);
        j["wall_margin"] = c.wall_margin;
        j["inversion_defect"] = c.inversion_defect;
        j["hull"] = json::array();
        for (const auto& h : c.hull) j["hull"].push_back(cartan_json(h));
        j["directions"] = c.mu_directions.size();
        j["regularity_margin"] = regularity_margin(table());
        emit_json(run_, j);
        return exit_ok;
    }

    CartanVector<D> direction() {
        Vec<D> v;
        if (run_.cfg.has("direction")) v = parse_coefficients<D>(run_.get("direction"));
        else v = ctx_.measure_direction().coefficients();
        auto u = CartanVector<D>::project(v);
        return u * (1.0 / u.norm());
    }

    int growth() {
        auto u = direction();
        auto g = growth_indicator_estimate(table(), u, run_.cfg.get_double("theta", 0.05));
        json j = envelope(run_);
        j["direction"] = cartan_json(u);
        j["value"] = std::isfinite(g.value) ? json(g.value) : json(nullptr);
        j["stderr"] = g.stderr_value;
        j["upper"] = std::isfinite(g.upper) ? json(g.upper) : json(nullptr);
        j["count"] = g.count;
        j["curve"] = json::array();
        for (const auto& [t, n] : g.curve) j["curve"].push_back({t, n});
        emit_json(run_, j);
        return exit_ok;
    }

    int exponent() {
        LinearForm<D> dir = ctx_.measure_direction();
        auto ce = critical_exponent(table(), CartanVector<D>::project(dir.coefficients()));
        double s = shell_balanced_exponent(table(), dir);
        json j = envelope(run_);
        j["psi"] = io::vector_json<D>(dir.coefficients());
        j["critical_exponent"] = ce.value;
        j["stderr"] = ce.fit.stderr_value;
        j["upper"] = ce.fit.upper;
        j["balanced_exponent"] = s;
        int first = std::max(1, table().max_len() / 2);
        j["shell_ratio_below"] = shell_ratio(ce.below, first);
        j["shell_ratio_above"] = shell_ratio(ce.above, first);
        j["shell_ratio_tangent"] = shell_ratio(poincare_partial(table(), dir, ce.value), first);
        j["shell_ratio_1_5"] = shell_ratio(poincare_partial(table(), dir, 1.5 * ce.value), first);
        j["shells_above"] = ce.above.shells;
        emit_json(run_, j);
        return exit_ok;
    }

    int floor() { return static_cast<int>(run_.cfg.get_int("floor", std::max(1, run_.max_len() / 2))); }

    int ps_build() {
        auto nu = build_ps(table(), form(), floor());
        json j = io::measure_json(nu);
        j["config_hash"] = run_.cfg.hash();
        j["seed"] = run_.seed();
        emit_json(run_, j);
        std::cerr << "measure with " << nu.size() << " atoms\n";
        return exit_ok;
    }

    int metric() {
        std::size_t n = run_.count("samples");
        LinearForm<D> psi = ctx_.psi ? *ctx_.psi : LinearForm<D>::omega(1);
        auto words = ctx_.boundary_words(n, 401);
        auto s = limit_metric_sample(ctx_.zeta(), words, ctx_.depth, psi);
        std::vector<Word> half(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(n / 2));
        auto sh = limit_metric_sample(ctx_.zeta(), half, ctx_.depth, psi);
        auto w = weak_constants(s), wh = weak_constants(sh);
        auto tri = triangle_constant(s), trih = triangle_constant(sh);
        double eps = 0.5 * max_admissible_eps(w);
        if (!std::isfinite(eps)) eps = 0.5;
        auto pm = power_metric(s, eps);
        auto pair = [&](std::size_t a, std::size_t b) { return words[a].prefix(12).str() + "|" + words[b].prefix(12).str(); };
        json j = envelope(run_);
        j["psi"] = io::vector_json<D>(psi.coefficients());
        j["eps"] = eps;
        j["reports"] = {
            io::constant_report_json({"weak-constants.symmetry", w.c_sym, pair(w.sym_witness[0], w.sym_witness[1]), n,
                                      ratio(w.c_sym, wh.c_sym)}),
            io::constant_report_json({"weak-constants.ultrametric", w.c_ultra,
                                      pair(w.ultra_witness[0], w.ultra_witness[2]), n, ratio(w.c_ultra, wh.c_ultra)}),
            io::constant_report_json({"triangle-constant", tri.n, pair(tri.witness[0], tri.witness[2]), n, ratio(tri.n, trih.n)}),
            io::constant_report_json({"power-metric.distortion", pm.distortion, pair(pm.witness[0], pm.witness[1]), n, 1.0}),
        };
        emit_json(run_, j);
        return exit_ok;
    }

    static double ratio(double a, double b) { return b != 0 ? a / b : (a == 0 ? 1.0 : INFINITY); }

    int shadow() {
        int h = ctx_.horizon();
        std::size_t n = run_.count("samples");
        double r = run_.cfg.get_double("radius", 1.0);
        auto r1 = ctx_.rng(301), r2 = ctx_.rng(301);
        auto half = shadow_kappa_fit(table(), ctx_.zeta(), r, h, n / 2, ctx_.depth, r1);
        auto full = shadow_kappa_fit(table(), ctx_.zeta(), r, h, n, ctx_.depth, r2);
        auto r3 = ctx_.rng(302), r4 = ctx_.rng(302);
        auto th = shadow_transfer_fit(table(), ctx_.zeta(), 2, h, n / 2, 40, r3);
        auto tf = shadow_transfer_fit(table(), ctx_.zeta(), 2, h, n, 40, r4);
        json j = envelope(run_);
        j["precision_horizon"] = h;
        j["radius"] = r;
        j["members"] = full.members;
        j["indeterminate"] = full.indeterminate;
        j["reports"] = {
            io::constant_report_json({"shadow-lemma.kappa", full.kappa,
                                      full.witness_target.str() + "|" + full.witness_word.prefix(16).str(), n,
                                      ratio(full.kappa, half.kappa)}),
            io::constant_report_json({"shadow-transfer.c", tf.c, tf.witness_target.str(), n, ratio(tf.c, th.c)}),
        };
        emit_json(run_, j);
        return exit_ok;
    }

    DiscreteMeasure<D> measure() {
        if (run_.cfg.has("measure")) {
            auto nu = io::measure_from_json<D>(io::parse_json(io::read_file(run_.get("measure")), "measure"));
            nu.normalize();
            return nu;
        }
        return build_ps(table(), form(), floor());
    }

    int essential() {
        auto nu = measure();
        auto words = ctx_.boundary_words(100, 501);
        double n0 = triangle_constant(limit_metric_sample(ctx_.zeta(), words, ctx_.depth, nu.psi)).n0();
        EssentialOptions o;
        o.n0 = n0;
        EssentialOptions refined = o;
        refined.opt = o.opt.refined();
        if (run_.cfg.has("certificate")) {
            auto cert = io::certificate_from_json(io::parse_json(io::read_file(run_.get("certificate")), "certificate"),
                                                  ctx_.preset().alphabet());
            bool ok = verify_certificate(table(), nu, cert, AtomSet<D>{}, refined);
            std::cerr << (ok ? "certificate verified\n" : "certificate does not verify\n");
            return ok ? exit_ok : exit_suite;
        }
        Word g0;
        if (run_.cfg.has("gamma0")) {
            g0 = Word::parse(run_.get("gamma0"), ctx_.preset().alphabet());
        } else {
            // smallest power of the first generator with psi(lambda) >= 1 + log 3 N0
            g0 = Word::letter(0);
            while (nu.psi(jordan_projection(evaluate(table().generators(), g0))) < 1 + std::log(3 * n0)) {
                g0 = g0 * Word::letter(0);
                if (g0.size() > 64) throw DomainError("no power of the first generator reaches the threshold");
            }
        }
        auto cert = essential_value_search(table(), nu, g0, run_.cfg.get_double("eps", 0.5), AtomSet<D>{}, o);
        json j = io::certificate_json(cert);
        j["n0"] = n0;
        j["verified_refined"] = cert.found && verify_certificate(table(), nu, cert, AtomSet<D>{}, refined);
        j["config_hash"] = run_.cfg.hash();
        j["seed"] = run_.seed();
        emit_json(run_, j);
        std::cerr << (cert.found ? "certificate found with conjugator " + cert.conjugator.str() : "no certificate")
                  << "\n";
        return exit_ok;
    }

    int myrberg() {
        auto rng = ctx_.rng(601);
        const Alphabet ab = ctx_.preset().alphabet();
        auto xi0 = attracting_flag(evaluate(table().generators(), BoundaryWord::random(9, ab, rng).prefix));
        std::vector<FlagPair<D>> targets;
        const std::size_t n = run_.count("targets");
        while (targets.size() < n) {
            FlagPair<D> p(ctx_.zeta()(BoundaryWord::random(32, ab, rng), 32), ctx_.zeta()(BoundaryWord::random(32, ab, rng), 32));
            if (p.transversal()) targets.push_back(p);
        }
        double tol = run_.cfg.get_double("tol", 0.05);
        json j = envelope(run_);
        j["tol"] = tol;
        j["scores"] = json::array();
        for (int L = run_.max_len() % 2 == 0 ? 2 : 1; L <= run_.max_len(); L += 2) {
            auto s = myrberg_score(xi0, table().truncated(L), targets, tol);
            j["scores"].push_back({{"L", L}, {"score", s.score}});
        }
        emit_json(run_, j);
        return exit_ok;
    }

    // First flag line in disk coordinates: for d >= 3 the stereographic image of the upper
    // hemisphere representative; for d = 2 the point (cos 2t, sin 2t) of the projective line.
    static std::pair<double, double> disk(const Flag<D>& f) {
        Vec<D> v = f.line();
        if constexpr (D == 2) {
            double t = std::atan2(v(1), v(0));
            return {std::cos(2 * t), std::sin(2 * t)};
        } else {
            if (v(D - 1) < 0) v = -v;
            return {v(0) / (1 + v(D - 1)), v(1) / (1 + v(D - 1))};
        }
    }

    int limitset() {
        const auto& t = table();
        int fl = floor();
        if (fl < 1 || fl > t.max_len()) throw InputError("floor must lie in 1..max_len");
        std::string s = "word,x,y";
        for (int i = 1; i <= D; ++i) s += ",dir_" + std::to_string(i);
        s += "\n";
        for (std::size_t i = t.shell_begin(fl); i < t.size(); ++i) {
            auto [x, y] = disk(t.flag(i));
            s += t.word(i).str() + "," + io::fmt17(x) + "," + io::fmt17(y);
            const auto& mu = t.mu(i);
            for (int k = 0; k < D; ++k) s += "," + io::fmt17(mu[k] / mu.norm());
            s += "\n";
        }
        emit(run_, s);
        return exit_ok;
    }

    int verify() {
        auto selected = select_suites<D>(run_.get("suite"));
        std::vector<SuiteResult> results;
        if (run_.cfg.has("table")) results.push_back(table_consistency());
        for (const auto* spec : selected) {
            results.push_back(run_suite(*spec, ctx_));
            const auto& r = results.back();
            std::cerr << r.status() << " " << r.lemma_id << " (" << r.seconds << " s)"
                      << (r.note.empty() ? "" : ": " + r.note) << "\n";
        }
        return report(run_, ctx_.preset().name, results);
    }

    // Rows of a previously exported table against a fresh enumeration.
    SuiteResult table_consistency() {
        SuiteResult r;
        r.lemma_id = "table-consistency";
        auto rows = io::table_from_csv<D>(io::read_file(run_.get("table")));
        const auto& t = table();
        double worst = 0;
        std::size_t checked = 0;
        for (std::size_t i = 0; i < rows.size() && i < t.size(); ++i, ++checked) {
            if (rows[i].word != t.word(i).str()) {
                r.check(false, "row " + std::to_string(i + 1) + " has word " + rows[i].word);
                break;
            }
            double scale = 1 + t.mu(i).norm();
            worst = std::max(worst, (rows[i].mu - t.mu(i).coords()).norm() / scale);
            worst = std::max(worst, (rows[i].lam - t.lam(i).coords()).norm() / scale);
        }
        r.constant("rows", static_cast<double>(rows.size()));
        r.constant("max_relative_residual", worst);
        r.check(rows.size() <= t.size(), "table is longer than the enumeration at max_len");
        r.check(worst <= 1e-9, "table values differ from the enumeration");
        return r;
    }

public:
    static int report(const Run& run, const std::string& preset, const std::vector<SuiteResult>& results) {
        json j = envelope(run);
        j["preset"] = preset;
        j["max_len"] = run.max_len();
        j["suites"] = json::array();
        bool failed = false;
        for (const auto& r : results) {
            json s;
            s["lemma_id"] = r.lemma_id;
            s["status"] = r.status();
            s["hard"] = r.hard;
            s["fitted_constants"] = json::object();
            for (const auto& [k, v] : r.constants) s["fitted_constants"][k] = std::isfinite(v) ? json(v) : json(nullptr);
            s["witnesses"] = json::object();
            for (const auto& [k, v] : r.witnesses) s["witnesses"][k] = v;
            s["note"] = r.note;
            s["seconds"] = r.seconds;
            j["suites"].push_back(s);
            failed = failed || r.fails_run();
        }
        j["passed"] = !failed;
        emit_json(run, j);
        return failed ? exit_suite : exit_ok;
    }
};

// ---------------------------------------------------------------- presets

json builtin_preset(const std::string& name) {
    if (name == "sl3_rank2") return io::preset_json(make_schottky_preset<3>(PresetRecipe{}, name));
    if (name == "sl2_rank2") return io::preset_json(make_schottky_preset<2>(PresetRecipe{}, name));
    throw MissingInputError("unknown builtin preset " + name);
}

json load_preset(const std::string& spec) {
    const std::string prefix = "builtin:";
    if (spec.rfind(prefix, 0) == 0) return builtin_preset(spec.substr(prefix.size()));
    return io::parse_json(io::read_file(spec), "preset " + spec);
}

template <int D> int run_dim(const Run& run, const json& pj) {
    SchottkyPreset<D> preset;
    try {
        preset = io::preset_from_json<D>(pj);
    } catch (const PresetIntegrityError& e) {
        if (run.command != "verify") throw;
        SuiteResult r;
        r.lemma_id = "preset-integrity";
        r.check(false, e.what());
        std::cerr << "fail preset-integrity: " << e.what() << "\n";
        return Commands<D>::report(run, pj.value("name", std::string("unnamed")), {r});
    }
    Commands<D> c(run, preset);
    return c.dispatch();
}

int make_preset(const Run& run) {
    PresetRecipe recipe;
    recipe.rank = static_cast<int>(run.cfg.get_int("rank", 2));
    recipe.seed = run.seed();
    recipe.draws = static_cast<int>(run.cfg.get_int("draws", recipe.draws));
    int dim = static_cast<int>(run.cfg.get_int("dim", 3));
    std::string name = run.cfg.get("name", "sl" + std::to_string(dim) + "_rank" + std::to_string(recipe.rank));
    json j;
    switch (dim) {
        case 2: j = io::preset_json(make_schottky_preset<2>(recipe, name)); break;
        case 3: j = io::preset_json(make_schottky_preset<3>(recipe, name)); break;
        case 4: j = io::preset_json(make_schottky_preset<4>(recipe, name)); break;
        default: throw InputError("dim must be 2, 3 or 4");
    }
    emit(run, j.dump(2) + "\n");
    return exit_ok;
}

int execute(const Run& run) {
    if (run.command == "make-preset") return make_preset(run);
    json pj = load_preset(run.get("preset"));
    int dim = 0;
    try {
        dim = io::preset_dimension(pj);
    } catch (const PresetIntegrityError&) {
        if (run.command != "verify") throw;
        dim = 3;  // surfaces through the preset-integrity suite
    }
    switch (dim) {
        case 2: return run_dim<2>(run, pj);
        case 3: return run_dim<3>(run, pj);
        case 4: return run_dim<4>(run, pj);
        default: throw PresetIntegrityError("unsupported preset dimension " + std::to_string(dim));
    }
}

struct CliFlag {
    const char* name;
    const char* key;
    const char* help;
};

const std::vector<CliFlag> flags{
    {"--preset", "preset", "preset JSON file or builtin:NAME"},
    {"--max-len,-L", "max_len", "maximal word length"},
    {"--psi", "psi", "comma-separated form coefficients or tangent-scan"},
    {"--seed", "seed", "random seed"},
    {"--out,-o", "out", "output file (default stdout)"},
    {"--suite", "suite", "comma-separated suites or groups for verify"},
    {"--table", "table", "orbit table CSV to check against the enumeration"},
    {"--measure", "measure", "measure JSON to use instead of building one"},
    {"--certificate", "certificate", "certificate JSON to re-verify"},
    {"--depth", "depth", "boundary-word evaluation depth"},
    {"--samples", "samples", "sample size"},
    {"--eps", "eps", "essential-value scale"},
    {"--gamma0", "gamma0", "word of the essential-value target"},
    {"--direction", "direction", "growth direction coefficients"},
    {"--theta", "theta", "growth cone half-angle"},
    {"--floor", "floor", "shell floor"},
    {"--tol", "tol", "Myrberg tolerance"},
    {"--targets", "targets", "number of Myrberg targets"},
    {"--cap", "cap", "enumeration cap"},
    {"--threads", "threads", "enumeration threads (0 = hardware)"},
    {"--dim", "dim", "make-preset dimension"},
    {"--rank", "rank", "make-preset rank"},
    {"--name", "name", "make-preset name"},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Patterson-Sullivan numerics for Schottky subgroups of SL(d, R)"};
    app.require_subcommand(1);
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> given;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"enumerate", "write the orbit table as CSV"},
        {"limit-cone", "limit cone directions and wall margin"},
        {"growth", "growth indicator along a direction"},
        {"exponent", "critical exponent of a form"},
        {"ps-build", "orbital Patterson-Sullivan measure as JSON"},
        {"verify", "run verification suites"},
        {"metric", "virtual metric constants"},
        {"shadow", "shadow lemma constants"},
        {"essential", "essential-value certificate search"},
        {"myrberg", "Myrberg coverage score"},
        {"limitset", "limit set plot data as CSV"},
        {"make-preset", "generate a Schottky preset"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config,-c", config_file, "key=value config file");
        sub->add_option("--set", sets, "key=value override");
        for (const auto& f : flags) sub->add_option(f.name, given[f.key], f.help);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? exit_ok : exit_input;
    }
    Run run;
    run.command = app.get_subcommands().front()->get_name();
    try {
        for (const auto& [k, v] : defaults) run.cfg.set(k, v);
        if (!config_file.empty()) run.cfg.merge(io::Config::load(config_file));
        auto* sub = app.get_subcommands().front();
        for (const auto& f : flags)
            if (sub->count(std::string(f.name).substr(0, std::string(f.name).find(','))) > 0) run.cfg.set(f.key, given[f.key]);
        for (const auto& s : sets) run.cfg.assign(s);
        return execute(run);
    } catch (const ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return exit_resource;
    } catch (const MissingInputError& e) {
        std::cerr << "missing input: " << e.what() << "\n";
        return exit_input;
    } catch (const PresetIntegrityError& e) {
        std::cerr << "preset integrity: " << e.what() << "\n";
        return exit_input;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return exit_input;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_suite;
    }
}
