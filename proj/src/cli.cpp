#include "qosec/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qosec/errors.hpp"
#include "qosec/learner.hpp"
#include "qosec/optimizer.hpp"
#include "qosec/protocol_sim.hpp"
#include "qosec/rng.hpp"
#include "qosec/secrecy_analysis.hpp"
#include "qosec/system_model.hpp"

namespace qosec {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config document access with path-aware diagnostics.

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg);
}

// A view onto one (possibly absent) object of the configuration document.
// Every accessor reports problems with the full dotted path, and
// allow_keys() rejects anything the schema does not know about.
class Section {
  public:
    Section(const json* obj, std::string path)
        : obj_(obj), path_(std::move(path)) {
        if (obj_ && !obj_->is_object()) fail(path_, "must be an object");
    }

    bool present() const { return obj_ != nullptr; }
    const std::string& path() const { return path_; }

    void allow_keys(std::initializer_list<const char*> keys) const {
        if (!obj_) return;
        for (auto it = obj_->begin(); it != obj_->end(); ++it) {
            bool known = false;
            for (const char* k : keys) known = known || it.key() == k;
            if (!known) fail(path_, "unknown key '" + it.key() + "'");
        }
    }

    bool has(const char* key) const { return obj_ && obj_->contains(key); }

    double number(const char* key, double fallback) const {
        if (!has(key)) return fallback;
        const json& v = (*obj_)[key];
        if (!v.is_number()) fail(path_ + "." + key, "must be a number");
        return v.get<double>();
    }

    double require_number(const char* key) const {
        if (!has(key)) fail(path_ + "." + key, "is required");
        return number(key, 0.0);
    }

    long long integer(const char* key, long long fallback) const {
        if (!has(key)) return fallback;
        const json& v = (*obj_)[key];
        if (!v.is_number_integer())
            fail(path_ + "." + key, "must be an integer");
        return v.get<long long>();
    }

    long long require_integer(const char* key) const {
        if (!has(key)) fail(path_ + "." + key, "is required");
        return integer(key, 0);
    }

    bool boolean(const char* key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = (*obj_)[key];
        if (!v.is_boolean()) fail(path_ + "." + key, "must be a boolean");
        return v.get<bool>();
    }

    std::string text(const char* key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const json& v = (*obj_)[key];
        if (!v.is_string()) fail(path_ + "." + key, "must be a string");
        return v.get<std::string>();
    }

    std::string require_text(const char* key) const {
        if (!has(key)) fail(path_ + "." + key, "is required");
        return text(key, "");
    }

    std::vector<double> number_list(const char* key) const {
        if (!has(key)) fail(path_ + "." + key, "is required");
        const json& v = (*obj_)[key];
        if (!v.is_array() || v.empty())
            fail(path_ + "." + key, "must be a non-empty array of numbers");
        std::vector<double> values;
        for (const json& e : v) {
            if (!e.is_number())
                fail(path_ + "." + key, "must contain only numbers");
            values.push_back(e.get<double>());
        }
        return values;
    }

    // Two-element [low, high] array with low <= high.
    std::pair<double, double> range(const char* key) const {
        const std::vector<double> v = number_list(key);
        if (v.size() != 2 || v[0] > v[1])
            fail(path_ + "." + key, "must be a [low, high] pair");
        return {v[0], v[1]};
    }

    Section child(const char* key) const {
        if (!has(key)) return Section(nullptr, path_ + "." + key);
        return Section(&(*obj_)[key], path_ + "." + key);
    }

  private:
    const json* obj_;
    std::string path_;
};

// A value that may be given linearly or in decibels (power ratio), but not
// both ways at once. Conversion to linear happens here and only here.
double linear_or_db(const Section& s, const char* lin, const char* db,
                    double fallback) {
    if (s.has(lin) && s.has(db))
        fail(s.path(), std::string("give either '") + lin + "' or '" + db +
                           "', not both");
    if (s.has(db)) return std::pow(10.0, s.require_number(db) / 10.0);
    return s.number(lin, fallback);
}

// ---------------------------------------------------------------------------
// Section parsers. Defaults match the in-library defaults.

SystemConfig parse_system(const Section& s) {
    s.allow_keys({"n_T", "eta", "lambda_E", "ratio_BT_b", "sigma_n", "r_D",
                  "rho", "gamma_min", "gamma_min_db", "gamma_max",
                  "gamma_max_db"});
    SystemConfig cfg;
    cfg.n_T = static_cast<int>(s.integer("n_T", cfg.n_T));
    cfg.eta = s.number("eta", cfg.eta);
    cfg.lambda_E = s.number("lambda_E", cfg.lambda_E);
    cfg.ratio_BT_b = s.number("ratio_BT_b", cfg.ratio_BT_b);
    cfg.sigma_n = s.number("sigma_n", cfg.sigma_n);
    cfg.r_D = s.number("r_D", cfg.r_D);
    cfg.rho = s.number("rho", cfg.rho);
    cfg.gamma_min = linear_or_db(s, "gamma_min", "gamma_min_db", cfg.gamma_min);
    cfg.gamma_max = linear_or_db(s, "gamma_max", "gamma_max_db", cfg.gamma_max);
    return cfg;
}

TxParams parse_tx(const Section& s) {
    s.allow_keys({"zeta", "P_p", "P_p_db", "P_s", "P_s_db", "nu", "L_s"});
    TxParams tx;
    tx.zeta = s.number("zeta", tx.zeta);
    tx.P_p = linear_or_db(s, "P_p", "P_p_db", tx.P_p);
    tx.P_s = linear_or_db(s, "P_s", "P_s_db", tx.P_s);
    tx.nu = s.number("nu", tx.nu);
    tx.L_s = static_cast<int>(s.integer("L_s", tx.L_s));
    return tx;
}

ImageSpec parse_image(const Section& s) {
    s.allow_keys({"N_roi", "N_bg", "D_lim"});
    ImageSpec img;
    img.N_roi = s.integer("N_roi", img.N_roi);
    img.N_bg = s.integer("N_bg", img.N_bg);
    img.D_lim = static_cast<int>(s.integer("D_lim", img.D_lim));
    return img;
}

EveMode parse_eve_mode(const Section& s, const char* key,
                       const std::string& value) {
    if (value == "nce") return EveMode::NCE;
    if (value == "ce") return EveMode::CE;
    fail(s.path() + "." + key, "must be 'nce' or 'ce', got '" + value + "'");
}

EveScenario parse_scenario(const Section& s) {
    s.allow_keys({"mode", "K_terms"});
    EveScenario scenario;
    if (s.has("mode"))
        scenario.mode = parse_eve_mode(s, "mode", s.require_text("mode"));
    scenario.K_terms = static_cast<int>(s.integer("K_terms", scenario.K_terms));
    return scenario;
}

SimOptions parse_sim_options(const Section& mc) {
    mc.allow_keys({"trials", "tolerance", "placement", "r_max", "records"});
    SimOptions opts;
    const std::string placement = mc.text("placement", "iid");
    if (placement == "iid") {
        opts.placement = EvePlacement::IID;
    } else if (placement == "static") {
        opts.placement = EvePlacement::Static;
    } else {
        fail(mc.path() + ".placement",
             "must be 'iid' or 'static', got '" + placement + "'");
    }
    opts.r_max = mc.number("r_max", 0.0);
    return opts;
}

GaSettings parse_ga(const Section& s) {
    GaSettings ga;
    ga.population = static_cast<int>(s.integer("population", ga.population));
    ga.generations = static_cast<int>(s.integer("generations", ga.generations));
    ga.tournament = static_cast<int>(s.integer("tournament", ga.tournament));
    ga.crossover_prob = s.number("crossover_prob", ga.crossover_prob);
    ga.sbx_eta = s.number("sbx_eta", ga.sbx_eta);
    ga.mutation_prob = s.number("mutation_prob", ga.mutation_prob);
    ga.mutation_scale = s.number("mutation_scale", ga.mutation_scale);
    ga.penalty = s.number("penalty", ga.penalty);
    return ga;
}

GenePins parse_pins(const Section& s) {
    s.allow_keys({"zeta", "p_pub_norm", "p_sec_norm", "nu_norm", "ls_index"});
    GenePins pins;
    if (s.has("zeta")) pins.zeta = s.require_number("zeta");
    if (s.has("p_pub_norm")) pins.p_pub_norm = s.require_number("p_pub_norm");
    if (s.has("p_sec_norm")) pins.p_sec_norm = s.require_number("p_sec_norm");
    if (s.has("nu_norm")) pins.nu_norm = s.require_number("nu_norm");
    if (s.has("ls_index"))
        pins.ls_index = static_cast<int>(s.require_integer("ls_index"));
    return pins;
}

// ---------------------------------------------------------------------------
// Provenance and table formatting.

std::string config_hash(const json& effective) {
    // FNV-1a over the canonical dump (object keys are stored sorted).
    const std::string text = effective.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

json provenance_json(const std::string& hash, std::uint64_t seed) {
    json p;
    p["config_hash"] = hash;
    p["seed"] = seed;
    p["build"] = kBuildId;
    return p;
}

void write_csv_provenance(std::ostream& os, const std::string& hash,
                          std::uint64_t seed) {
    os << "# config_hash: " << hash << "\n";
    os << "# seed: " << seed << "\n";
    os << "# build: " << kBuildId << "\n";
}

std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// Routes command output to --out when given, stdout otherwise.
class OutputTarget {
  public:
    OutputTarget(const std::string& path, std::ostream& fallback)
        : fallback_(fallback) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) fail("out", "cannot open for writing: " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : fallback_; }

  private:
    std::ofstream file_;
    std::ostream& fallback_;
};

void emit_json(const json& doc, const std::string& out_path,
               std::ostream& fallback) {
    OutputTarget target(out_path, fallback);
    target.stream() << doc.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Shared scenario assembly.

struct Parsed {
    SystemConfig cfg;
    TxParams tx;
    ImageSpec img;
    EveScenario scenario;
};

Parsed parse_run(const Section& root) {
    Parsed p;
    p.cfg = parse_system(root.child("system"));
    p.tx = parse_tx(root.child("tx"));
    p.img = parse_image(root.child("image"));
    p.scenario = parse_scenario(root.child("scenario"));
    return p;
}

json tx_to_json(const TxParams& tx) {
    json j;
    j["zeta"] = tx.zeta;
    j["P_p"] = tx.P_p;
    j["P_s"] = tx.P_s;
    j["nu"] = tx.nu;
    j["L_s"] = tx.L_s;
    return j;
}

json breakdown_to_json(const QvpBreakdown& b, double fip) {
    json j;
    j["qvp"] = b.qvp;
    j["delay_violation"] = b.delay_violation;
    j["intercept_term"] = b.intercept_term;
    j["frame_intercept_probability"] = fip;
    j["N_bar_bg"] = b.N_bar_bg;
    j["N_tilde"] = b.N_tilde;
    j["Omega"] = b.Omega;
    j["Lambda"] = b.Lambda;
    return j;
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_qvp(const json& doc, std::uint64_t seed, const std::string& out_path,
            std::ostream& out) {
    const Section root(&doc, "config");
    const Parsed p = parse_run(root);
    validate_scenario(p.cfg, p.tx, p.img, p.scenario);

    const QvpBreakdown breakdown = qvp(p.cfg, p.tx, p.img, p.scenario);
    const double fip = intercept_probability(p.cfg, p.tx, p.scenario);

    json result;
    result["provenance"] = provenance_json(config_hash(doc), seed);
    result["analytic"] = breakdown_to_json(breakdown, fip);

    const Section mc = root.child("mc");
    mc.allow_keys({"trials", "tolerance", "placement", "r_max", "records"});
    const long long trials = mc.integer("trials", 0);
    if (trials > 0) {
        const SimOptions opts = parse_sim_options(mc);
        const double tolerance = mc.number("tolerance", 0.02);
        std::vector<DeliveryOutcome> records;
        const std::string records_path = mc.text("records", "");
        const McEstimate est =
            estimate_qvp(p.cfg, p.tx, p.img, p.scenario, opts, trials, seed,
                         records_path.empty() ? nullptr : &records);
        json sim;
        sim["value"] = est.value;
        sim["std_err"] = est.std_err;
        sim["trials"] = est.trials;
        sim["tolerance"] = tolerance;
        sim["agree"] =
            std::abs(est.value - breakdown.qvp) <= tolerance + 3.0 * est.std_err;
        result["simulation"] = sim;

        if (!records_path.empty()) {
            std::ofstream rec(records_path);
            if (!rec)
                fail("mc.records", "cannot open for writing: " + records_path);
            for (std::size_t i = 0; i < records.size(); ++i) {
                json line;
                line["trial"] = i;
                line["T_D"] = records[i].T_D;
                line["T_E"] = records[i].T_E;
                line["delay_violated"] = records[i].delay_violated;
                line["intercepted_in_time"] = records[i].intercepted_in_time;
                rec << line.dump() << "\n";
            }
        }
    }

    emit_json(result, out_path, out);
    return kExitOk;
}

enum class SweepAxis { DLim, LambdaE, Rho, NTotal, NT };

SweepAxis parse_axis(const Section& s, const std::string& axis) {
    if (axis == "D_lim") return SweepAxis::DLim;
    if (axis == "lambda_E") return SweepAxis::LambdaE;
    if (axis == "rho") return SweepAxis::Rho;
    if (axis == "N_total") return SweepAxis::NTotal;
    if (axis == "n_T") return SweepAxis::NT;
    fail(s.path() + ".axis",
         "must be one of D_lim, lambda_E, rho, N_total, n_T; got '" + axis +
             "'");
}

long long require_integral(const Section& s, const char* key, double v) {
    if (v != std::floor(v) || std::abs(v) > 1e15)
        fail(s.path() + "." + std::string(key),
             "axis '" + std::string(key) + "' needs integer grid values");
    return static_cast<long long>(v);
}

// Applies one grid value to a copy of the base scenario.
void apply_axis(const Section& sweep, SweepAxis axis, double value,
                SystemConfig& cfg, ImageSpec& img, const TxParams& tx) {
    switch (axis) {
    case SweepAxis::DLim:
        img.D_lim = static_cast<int>(require_integral(sweep, "values", value));
        break;
    case SweepAxis::LambdaE:
        cfg.lambda_E = value;
        break;
    case SweepAxis::Rho:
        cfg.rho = value;
        break;
    case SweepAxis::NT:
        cfg.n_T = static_cast<int>(require_integral(sweep, "values", value));
        break;
    case SweepAxis::NTotal: {
        const long long total = require_integral(sweep, "values", value);
        const long long base_total = img.N_roi + img.N_bg;
        if (base_total <= 0)
            fail(sweep.path(), "N_total sweep needs a non-empty base image");
        if (total < tx.L_s)
            fail(sweep.path() + ".values",
                 "N_total grid value smaller than one confidential frame");
        const double share =
            static_cast<double>(img.N_roi) / static_cast<double>(base_total);
        // Keep the confidential share while honouring the frame-divisibility
        // constraint: round to the nearest multiple of L_s inside [L_s, total].
        long long n_roi = std::llround(share * static_cast<double>(total) /
                                       static_cast<double>(tx.L_s)) *
                          tx.L_s;
        n_roi = std::max<long long>(tx.L_s, n_roi);
        n_roi = std::min(n_roi, total / tx.L_s * tx.L_s);
        img.N_roi = n_roi;
        img.N_bg = total - n_roi;
        break;
    }
    }
}

int cmd_sweep(const json& doc, std::uint64_t seed, const std::string& out_path,
              std::ostream& out) {
    const Section root(&doc, "config");
    const Parsed base = parse_run(root);

    const Section sweep = root.child("sweep");
    if (!sweep.present()) fail("config.sweep", "is required for this command");
    sweep.allow_keys({"axis", "values", "scenarios", "simulate"});
    const SweepAxis axis = parse_axis(sweep, sweep.require_text("axis"));
    const std::vector<double> values = sweep.number_list("values");

    std::vector<EveMode> modes;
    if (sweep.has("scenarios")) {
        const json& arr = doc["sweep"]["scenarios"];
        if (!arr.is_array() || arr.empty())
            fail("config.sweep.scenarios", "must be a non-empty array");
        for (const json& e : arr) {
            if (!e.is_string())
                fail("config.sweep.scenarios", "must contain strings");
            modes.push_back(
                parse_eve_mode(sweep, "scenarios", e.get<std::string>()));
        }
    } else {
        modes.push_back(base.scenario.mode);
    }

    const Section mc = root.child("mc");
    const long long trials = mc.integer("trials", 0);
    const bool simulate = sweep.boolean("simulate", false);
    if (simulate && trials <= 0)
        fail("config.mc.trials", "must be positive when sweep.simulate is on");
    const double tolerance = mc.number("tolerance", 0.02);
    const SimOptions opts =
        mc.present() ? parse_sim_options(mc) : SimOptions{};

    struct Row {
        double value;
        const char* scenario;
        QvpBreakdown breakdown;
        double fip;
        bool simulated = false;
        McEstimate est;
    };
    std::vector<Row> rows;

    for (EveMode mode : modes) {
        EveScenario scenario = base.scenario;
        scenario.mode = mode;

        // The deadline axis shares one batch of trials across the whole
        // grid; every other axis re-simulates per point with the same seed
        // (common random numbers keep the curves smooth).
        std::vector<McEstimate> curve;
        if (simulate && axis == SweepAxis::DLim) {
            std::vector<int> grid;
            for (double v : values)
                grid.push_back(static_cast<int>(
                    require_integral(sweep, "values", v)));
            SystemConfig cfg = base.cfg;
            ImageSpec img = base.img;
            img.D_lim = *std::max_element(grid.begin(), grid.end());
            validate_scenario(cfg, base.tx, img, scenario);
            curve = qvp_curve(cfg, base.tx, img, scenario, opts, grid, trials,
                              seed);
        }

        for (std::size_t i = 0; i < values.size(); ++i) {
            SystemConfig cfg = base.cfg;
            ImageSpec img = base.img;
            apply_axis(sweep, axis, values[i], cfg, img, base.tx);
            validate_scenario(cfg, base.tx, img, scenario);

            Row row;
            row.value = values[i];
            row.scenario = mode == EveMode::NCE ? "nce" : "ce";
            row.breakdown = qvp(cfg, base.tx, img, scenario);
            row.fip = intercept_probability(cfg, base.tx, scenario);
            if (simulate) {
                row.simulated = true;
                row.est = axis == SweepAxis::DLim
                              ? curve[i]
                              : estimate_qvp(cfg, base.tx, img, scenario, opts,
                                             trials, seed, nullptr);
            }
            rows.push_back(row);
        }
    }

    OutputTarget target(out_path, out);
    std::ostream& os = target.stream();
    write_csv_provenance(os, config_hash(doc), seed);
    os << "axis,value,scenario,qvp,delay_violation,intercept_term,"
          "frame_intercept_probability,N_tilde,qvp_sim,qvp_sim_std_err,agree\n";
    const std::string axis_label = sweep.require_text("axis");
    for (const Row& row : rows) {
        os << axis_label << "," << fmt12(row.value) << "," << row.scenario
           << "," << fmt12(row.breakdown.qvp) << ","
           << fmt12(row.breakdown.delay_violation) << ","
           << fmt12(row.breakdown.intercept_term) << "," << fmt12(row.fip)
           << "," << row.breakdown.N_tilde << ",";
        if (row.simulated) {
            const bool agree = std::abs(row.est.value - row.breakdown.qvp) <=
                               tolerance + 3.0 * row.est.std_err;
            os << fmt12(row.est.value) << "," << fmt12(row.est.std_err) << ","
               << (agree ? 1 : 0);
        } else {
            os << ",,";
        }
        os << "\n";
    }
    return kExitOk;
}

int cmd_min_ls(const json& doc, std::uint64_t seed, const std::string& out_path,
               std::ostream& out) {
    const Section root(&doc, "config");
    const Parsed p = parse_run(root);
    p.cfg.validate();
    p.tx.validate(p.cfg); // the frame length itself is ignored by the search
    p.img.validate();
    p.scenario.validate();

    const Section ml = root.child("min_ls");
    double epsilon;
    if (ml.present()) {
        ml.allow_keys({"epsilon"});
        epsilon = ml.require_number("epsilon");
    } else {
        const Section opt = root.child("optimizer");
        if (!opt.has("eps_IP"))
            fail("config.min_ls.epsilon", "is required for this command");
        epsilon = opt.require_number("eps_IP");
    }

    const int ls = min_secure_Ls(p.cfg, p.tx, p.scenario, epsilon, p.img.N_roi);
    TxParams chosen = p.tx;
    chosen.L_s = ls;

    json result;
    result["provenance"] = provenance_json(config_hash(doc), seed);
    result["epsilon"] = epsilon;
    result["L_s"] = ls;
    result["frame_intercept_probability"] =
        intercept_probability(p.cfg, chosen, p.scenario);
    emit_json(result, out_path, out);
    return kExitOk;
}

const std::initializer_list<const char*> kOptimizerKeys = {
    "eps_IP",     "population",    "generations",    "tournament",
    "crossover_prob", "sbx_eta",   "mutation_prob",  "mutation_scale",
    "penalty",    "baseline",      "pins"};

int cmd_optimize(const json& doc, std::uint64_t seed,
                 const std::string& out_path, std::ostream& out) {
    const Section root(&doc, "config");
    const Parsed p = parse_run(root);

    const Section opt = root.child("optimizer");
    opt.allow_keys(kOptimizerKeys);

    OptProblem problem;
    problem.cfg = p.cfg;
    problem.img = p.img;
    problem.scenario = p.scenario;
    problem.eps_IP = opt.number("eps_IP", problem.eps_IP);

    const GaSettings ga = parse_ga(opt);
    const GenePins pins = parse_pins(opt.child("pins"));
    const std::string baseline = opt.text("baseline", "none");

    Rng rng(seed);
    OptResult res;
    if (baseline == "mp") {
        res = baseline_mp(problem, ga, rng);
    } else if (baseline == "ep") {
        res = baseline_ep(problem, ga, rng);
    } else if (baseline == "none") {
        res = solve_pinned(problem, ga, rng, pins);
    } else {
        fail("config.optimizer.baseline",
             "must be 'none', 'mp', or 'ep'; got '" + baseline + "'");
    }

    json result;
    result["provenance"] = provenance_json(config_hash(doc), seed);
    result["tx"] = tx_to_json(res.tx_star);
    result["qvp"] = res.qvp_star;
    result["feasible"] = res.feasible;
    result["evaluations"] = res.evaluations;
    result["history"] = res.history;
    emit_json(result, out_path, out);
    return kExitOk;
}

long long draw_int(Rng& rng, long long lo, long long hi) {
    const double u = rng.uniform01();
    const auto span = static_cast<double>(hi - lo + 1);
    return std::min(hi, lo + static_cast<long long>(u * span));
}

int cmd_gen_dataset(const json& doc, std::uint64_t seed,
                    const std::string& out_path, std::ostream& out) {
    const Section root(&doc, "config");
    const SystemConfig base_cfg = parse_system(root.child("system"));
    const EveScenario scenario = parse_scenario(root.child("scenario"));

    const Section ds = root.child("dataset");
    if (!ds.present()) fail("config.dataset", "is required for this command");
    ds.allow_keys(
        {"count", "N_roi", "N_bg", "r_D", "rho", "D_lim", "D_lim_factor"});
    const long long count = ds.require_integer("count");
    if (count < 1) fail("config.dataset.count", "must be >= 1");

    const auto [nroi_lo_d, nroi_hi_d] = ds.range("N_roi");
    const auto [nbg_lo_d, nbg_hi_d] = ds.range("N_bg");
    const auto [rd_lo, rd_hi] = ds.range("r_D");
    const auto [rho_lo, rho_hi] = ds.range("rho");
    const long long nroi_lo = require_integral(ds, "N_roi", nroi_lo_d);
    const long long nroi_hi = require_integral(ds, "N_roi", nroi_hi_d);
    const long long nbg_lo = require_integral(ds, "N_bg", nbg_lo_d);
    const long long nbg_hi = require_integral(ds, "N_bg", nbg_hi_d);
    if (nroi_lo < 1) fail("config.dataset.N_roi", "lower bound must be >= 1");
    if (nbg_lo < 0) fail("config.dataset.N_bg", "lower bound must be >= 0");

    const bool fixed_dlim = ds.has("D_lim");
    const long long dlim_abs = ds.integer("D_lim", 0);
    const double dlim_factor = ds.number("D_lim_factor", 0.4);
    if (fixed_dlim && dlim_abs < 1)
        fail("config.dataset.D_lim", "must be >= 1");
    if (!fixed_dlim && !(dlim_factor > 0.0))
        fail("config.dataset.D_lim_factor", "must be positive");

    const Section opt = root.child("optimizer");
    opt.allow_keys(kOptimizerKeys);
    OptProblem problem_template;
    problem_template.scenario = scenario;
    problem_template.eps_IP = opt.number("eps_IP", problem_template.eps_IP);
    const GaSettings ga = parse_ga(opt);
    const GenePins pins = parse_pins(opt.child("pins"));

    OutputTarget target(out_path, out);
    std::ostream& os = target.stream();
    write_csv_provenance(os, config_hash(doc), seed);
    os << "sample,seed,N_roi,N_bg,r_D,rho,D_lim,zeta,p_pub_norm,p_sec_norm,"
          "nu_norm,ls_norm,qvp,feasible\n";

    for (long long i = 0; i < count; ++i) {
        // One substream for the scenario draw, a disjoint one for the search,
        // so adding samples never perturbs earlier rows.
        Rng draw = Rng::substream(seed, static_cast<std::uint64_t>(i));
        OptProblem problem = problem_template;
        problem.cfg = base_cfg;
        problem.img.N_roi = draw_int(draw, nroi_lo, nroi_hi);
        problem.img.N_bg = draw_int(draw, nbg_lo, nbg_hi);
        problem.cfg.r_D = rd_lo + draw.uniform01() * (rd_hi - rd_lo);
        problem.cfg.rho = rho_lo + draw.uniform01() * (rho_hi - rho_lo);
        problem.img.D_lim = static_cast<int>(
            fixed_dlim ? dlim_abs
                       : std::max<long long>(
                             1, std::llround(dlim_factor *
                                             static_cast<double>(
                                                 problem.img.N_roi))));

        Rng search = Rng::substream(
            seed, static_cast<std::uint64_t>(i) + (1ull << 32));
        const OptResult res = solve_pinned(problem, ga, search, pins);

        const double denom = problem.cfg.sigma_n * problem.cfg.gamma_max;
        const double nu_norm = std::max(
            1e-9, res.tx_star.nu / (4.0 * problem.cfg.n_T));
        os << i << "," << i << "," << problem.img.N_roi << ","
           << problem.img.N_bg << "," << fmt12(problem.cfg.r_D) << ","
           << fmt12(problem.cfg.rho) << "," << problem.img.D_lim << ","
           << fmt12(res.tx_star.zeta) << "," << fmt12(res.tx_star.P_p / denom)
           << "," << fmt12(res.tx_star.P_s / denom) << "," << fmt12(nu_norm)
           << ","
           << fmt12(static_cast<double>(res.tx_star.L_s) /
                    static_cast<double>(problem.img.N_roi))
           << "," << fmt12(res.qvp_star) << "," << (res.feasible ? 1 : 0)
           << "\n";
    }
    return kExitOk;
}

// Minimal reader for the dataset tables this tool writes: '#' comments, one
// header row, comma-separated columns addressed by name.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name, const std::string& path) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        fail(path, "missing column '" + name + "'");
    }
};

CsvTable read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("train.dataset", "cannot open: " + path);
    CsvTable table;
    std::string line;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!have_header) {
            table.columns = cells;
            have_header = true;
        } else {
            if (cells.size() != table.columns.size())
                fail("train.dataset",
                     "row with " + std::to_string(cells.size()) +
                         " cells under a " +
                         std::to_string(table.columns.size()) +
                         "-column header in " + path);
            table.rows.push_back(cells);
        }
    }
    if (!have_header) fail("train.dataset", "no header row in " + path);
    return table;
}

double cell_number(const std::string& cell, const std::string& context) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        fail(context, "not a number: '" + cell + "'");
    }
}

int cmd_train(const json& doc, std::uint64_t seed, const std::string& out_path,
              std::ostream& out) {
    const Section root(&doc, "config");
    const Section tr = root.child("train");
    if (!tr.present()) fail("config.train", "is required for this command");
    tr.allow_keys({"dataset", "model_out", "feasible_only", "n_train", "n_val",
                   "n_test", "batch_size", "max_epochs", "learning_rate",
                   "lr_drop_factor", "lr_drop_period"});

    const std::string dataset_path = tr.require_text("dataset");
    const std::string model_path =
        !out_path.empty() ? out_path : tr.require_text("model_out");

    const CsvTable table = read_csv(dataset_path);
    const char* kInputs[4] = {"N_roi", "N_bg", "r_D", "rho"};
    const char* kTargets[5] = {"zeta", "p_pub_norm", "p_sec_norm", "nu_norm",
                               "ls_norm"};
    std::size_t in_idx[4], tg_idx[5];
    for (int i = 0; i < 4; ++i)
        in_idx[i] = table.column(kInputs[i], "config.train.dataset");
    for (int i = 0; i < 5; ++i)
        tg_idx[i] = table.column(kTargets[i], "config.train.dataset");

    const bool feasible_only = tr.boolean("feasible_only", true);
    std::optional<std::size_t> feas_idx;
    for (std::size_t i = 0; i < table.columns.size(); ++i)
        if (table.columns[i] == "feasible") feas_idx = i;

    std::vector<TrainingSample> samples;
    for (const auto& row : table.rows) {
        if (feasible_only && feas_idx && row[*feas_idx] == "0") continue;
        TrainingSample s;
        for (int i = 0; i < 4; ++i)
            s.input[static_cast<std::size_t>(i)] =
                cell_number(row[in_idx[i]], "config.train.dataset");
        for (int i = 0; i < 5; ++i)
            s.target[static_cast<std::size_t>(i)] =
                cell_number(row[tg_idx[i]], "config.train.dataset");
        samples.push_back(s);
    }

    TrainSettings settings;
    settings.n_train = tr.integer("n_train", settings.n_train);
    settings.n_val = tr.integer("n_val", settings.n_val);
    settings.n_test = tr.integer("n_test", settings.n_test);
    settings.batch_size =
        static_cast<int>(tr.integer("batch_size", settings.batch_size));
    settings.max_epochs =
        static_cast<int>(tr.integer("max_epochs", settings.max_epochs));
    settings.learning_rate = tr.number("learning_rate", settings.learning_rate);
    settings.lr_drop_factor =
        tr.number("lr_drop_factor", settings.lr_drop_factor);
    settings.lr_drop_period = static_cast<int>(
        tr.integer("lr_drop_period", settings.lr_drop_period));

    Rng rng(seed);
    const auto [model, report] = train(samples, settings, rng);
    save_model(model, model_path);

    json result;
    result["provenance"] = provenance_json(config_hash(doc), seed);
    result["model"] = model_path;
    result["samples_used"] = samples.size();
    result["epochs"] = report.epochs;
    result["best_epoch"] = report.best_epoch;
    result["train_mse_final"] = report.train_mse.back();
    result["val_mse_best"] =
        report.val_mse[static_cast<std::size_t>(report.best_epoch)];
    result["train_mse_at_best"] =
        report.train_mse[static_cast<std::size_t>(report.best_epoch)];
    result["test_mse"] = report.test_mse;
    emit_json(result, "", out);
    return kExitOk;
}

int cmd_predict(const json& doc, std::uint64_t seed,
                const std::string& out_path, std::ostream& out) {
    const Section root(&doc, "config");
    const Section pr = root.child("predict");
    if (!pr.present()) fail("config.predict", "is required for this command");
    pr.allow_keys({"model"});
    const std::string model_path = pr.require_text("model");

    const SystemConfig cfg = parse_system(root.child("system"));
    const ImageSpec img = parse_image(root.child("image"));
    cfg.validate();
    img.validate();

    const DnnModel model = load_model(model_path);
    const TxParams tx = predict(model, cfg, img);

    json result;
    result["provenance"] = provenance_json(config_hash(doc), seed);
    result["tx"] = tx_to_json(tx);

    if (root.has("scenario")) {
        const EveScenario scenario = parse_scenario(root.child("scenario"));
        validate_scenario(cfg, tx, img, scenario);
        const QvpBreakdown b = qvp(cfg, tx, img, scenario);
        result["analytic"] =
            breakdown_to_json(b, intercept_probability(cfg, tx, scenario));
    }
    emit_json(result, out_path, out);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Top-level dispatch.

json load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open: " + path);
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: must be a JSON object");
    return doc;
}

void check_top_level(const json& doc) {
    const Section root(&doc, "config");
    root.allow_keys({"system", "tx", "image", "scenario", "mc", "sweep",
                     "optimizer", "min_ls", "dataset", "train", "predict",
                     "seed", "out"});
}

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<long long> trials;
    std::string scenario;
    std::string placement;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
    sub->add_option("--config", flags.config_path, "configuration file (JSON)")
        ->required();
    sub->add_option("--seed", flags.seed, "master seed (overrides config)");
    sub->add_option("--out", flags.out, "output path (default: stdout)");
    sub->add_option("--trials", flags.trials,
                    "Monte Carlo trials (overrides config)");
    sub->add_option("--scenario", flags.scenario,
                    "eavesdropper model: nce or ce (overrides config)")
        ->check(CLI::IsMember({"nce", "ce"}));
    sub->add_option("--mode", flags.placement,
                    "eavesdropper placement: iid or static (overrides config)")
        ->check(CLI::IsMember({"iid", "static"}));
}

int dispatch(const std::string& command, const CommonFlags& flags,
             std::ostream& out) {
    json doc = load_config(flags.config_path);

    // Flag overrides are folded into the document before hashing so the
    // provenance hash always reflects the effective configuration.
    if (flags.seed) doc["seed"] = *flags.seed;
    if (flags.trials) doc["mc"]["trials"] = *flags.trials;
    if (!flags.scenario.empty()) doc["scenario"]["mode"] = flags.scenario;
    if (!flags.placement.empty()) doc["mc"]["placement"] = flags.placement;

    check_top_level(doc);
    const Section root(&doc, "config");
    const auto seed_ll = root.integer("seed", 1);
    if (seed_ll < 0) fail("config.seed", "must be non-negative");
    const auto seed = static_cast<std::uint64_t>(seed_ll);
    const std::string out_path =
        !flags.out.empty() ? flags.out : root.text("out", "");

    if (command == "qvp") return cmd_qvp(doc, seed, out_path, out);
    if (command == "sweep") return cmd_sweep(doc, seed, out_path, out);
    if (command == "min-ls") return cmd_min_ls(doc, seed, out_path, out);
    if (command == "optimize") return cmd_optimize(doc, seed, out_path, out);
    if (command == "gen-dataset")
        return cmd_gen_dataset(doc, seed, out_path, out);
    if (command == "train") return cmd_train(doc, seed, out_path, out);
    if (command == "predict") return cmd_predict(doc, seed, out_path, out);
    throw ConfigError("unknown command: " + command);
}

} // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
    CLI::App app{"Delay-constrained covert image delivery: analysis, "
                 "simulation, optimization, and learning tools"};
    app.require_subcommand(1);

    const std::vector<std::pair<const char*, const char*>> kCommands = {
        {"qvp", "analytic violation probability, optionally checked by "
                "simulation"},
        {"sweep", "tabulate the analysis along one parameter axis"},
        {"min-ls", "smallest admissible confidential frame length"},
        {"optimize", "search for the best transmit strategy"},
        {"gen-dataset", "label random scenarios with optimizer output"},
        {"train", "fit the strategy predictor on a labelled dataset"},
        {"predict", "strategy lookup through a trained model"},
    };

    std::map<std::string, CommonFlags> flags;
    for (const auto& [name, description] : kCommands)
        add_common(app.add_subcommand(name, description), flags[name]);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        const std::string command = app.get_subcommands().front()->get_name();
        return dispatch(command, flags[command], out);
    } catch (const nlohmann::json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const UnsupportedError& e) {
        err << "unsupported: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

} // namespace qosec
