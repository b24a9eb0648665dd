#include "rpsim/latent_policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rpsim/error.hpp"

namespace rpsim {

namespace {

double dot_with_delta(const std::vector<double>& w, const std::vector<double>& delta, std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (w[i] + delta[i]) * x[i];
    return s;
}

void check_vector(const std::vector<double>& v, std::size_t arity, const std::string& what) {
    if (v.size() != arity)
        throw ConfigError(what + ": expected length " + std::to_string(arity) + ", got " + std::to_string(v.size()));
    for (double x : v)
        if (!std::isfinite(x)) throw ConfigError(what + ": non-finite coefficient");
}

bool in_open_unit(double x) { return x > 0.0 && x < 1.0; }

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

void PolicyConfig::validate() const {
    check_vector(w, kRevealArity, "w");
    check_vector(w_addr, kAddressArity, "w_addr");
    if (deltas.empty()) throw ConfigError("deltas: at least one cluster is required");
    if (deltas_addr.size() != deltas.size())
        throw ConfigError("deltas_addr: cluster count differs from deltas");
    for (std::size_t c = 0; c < deltas.size(); ++c) {
        check_vector(deltas[c], kRevealArity, "deltas[" + std::to_string(c) + "]");
        check_vector(deltas_addr[c], kAddressArity, "deltas_addr[" + std::to_string(c) + "]");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0,1]");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0,1]");
    if (!(t_lo > 0.0 && t_lo <= t_hi && t_hi < 1.0)) throw ConfigError("thresholds must satisfy 0 < T_lo <= T_hi < 1");
    if (n_low < 1) throw ConfigError("N must be >= 1");
    if (!in_open_unit(eta)) throw ConfigError("eta must lie in (0,1)");
    if (!in_open_unit(t_addr)) throw ConfigError("T_A must lie in (0,1)");
    if (k_addr < 1) throw ConfigError("K must be >= 1");
    if (tightening) {
        const auto& s = *tightening;
        if (!(s.lo_increment >= 0.0 && s.hi_increment >= s.lo_increment))
            throw ConfigError("tightening increments must satisfy 0 <= lo_increment <= hi_increment");
        if (!(s.cap >= t_hi && s.cap < 1.0)) throw ConfigError("tightening cap must lie in [T_hi, 1)");
    }
}

PolicyConfig PolicyConfig::defaults(std::size_t clusters) {
    PolicyConfig cfg;
    //        DG    ER   PA   CE   SP   NS    CM   PS    PQC  MR    o
    cfg.w = {-0.8, 0.6, 0.3, 1.2, 0.8, -0.2, 0.0, -0.4, 0.2, -3.0, 6.0};
    //             DG    ER   PA   CE   SP   NS   CM   PS   PQC  MR
    cfg.w_addr = {-0.5, 1.0, 0.8, 0.2, 0.2, 1.5, 2.0, 1.0, 0.8, -3.0};
    cfg.deltas.assign(clusters, std::vector<double>(kRevealArity, 0.0));
    cfg.deltas_addr.assign(clusters, std::vector<double>(kAddressArity, 0.0));
    return cfg;
}

json policy_to_json(const PolicyConfig& cfg) {
    json j = {{"schema_version", kPolicySchemaVersion},
              {"version", cfg.version},
              {"feature_arity", {{"reveal", kRevealArity}, {"address", kAddressArity}}},
              {"w", cfg.w},
              {"deltas", cfg.deltas},
              {"w_addr", cfg.w_addr},
              {"deltas_addr", cfg.deltas_addr},
              {"alpha", cfg.alpha},
              {"beta", cfg.beta},
              {"T_hi", cfg.t_hi},
              {"T_lo", cfg.t_lo},
              {"N", cfg.n_low},
              {"eta", cfg.eta},
              {"T_A", cfg.t_addr},
              {"K", cfg.k_addr},
              {"L", cfg.lag},
              {"meta_block", cfg.meta_block}};
    if (cfg.tightening) {
        j["progressive_tightening"] = {{"hi_increment", cfg.tightening->hi_increment},
                                       {"lo_increment", cfg.tightening->lo_increment},
                                       {"cap", cfg.tightening->cap}};
    } else {
        j["progressive_tightening"] = nullptr;
    }
    return j;
}

PolicyConfig policy_from_json(const json& j) {
    PolicyConfig cfg;
    try {
        if (j.value("schema_version", "") != kPolicySchemaVersion)
            throw ConfigError("policy schema_version must be '" + std::string(kPolicySchemaVersion) + "'");
        if (j.contains("feature_arity")) {
            const auto& fa = j["feature_arity"];
            if (fa.value("reveal", kRevealArity) != kRevealArity || fa.value("address", kAddressArity) != kAddressArity)
                throw ConfigError("policy feature_arity does not match this build");
        }
        cfg.version = j.value("version", cfg.version);
        cfg.w = j.at("w").get<std::vector<double>>();
        cfg.deltas = j.at("deltas").get<std::vector<std::vector<double>>>();
        cfg.w_addr = j.at("w_addr").get<std::vector<double>>();
        cfg.deltas_addr = j.at("deltas_addr").get<std::vector<std::vector<double>>>();
        cfg.alpha = j.at("alpha").get<double>();
        cfg.beta = j.at("beta").get<double>();
        cfg.t_hi = j.at("T_hi").get<double>();
        cfg.t_lo = j.at("T_lo").get<double>();
        cfg.n_low = j.at("N").get<std::size_t>();
        cfg.eta = j.at("eta").get<double>();
        cfg.t_addr = j.at("T_A").get<double>();
        cfg.k_addr = j.at("K").get<std::size_t>();
        cfg.lag = j.at("L").get<std::size_t>();
        cfg.meta_block = j.value("meta_block", true);
        if (j.contains("progressive_tightening") && !j["progressive_tightening"].is_null()) {
            const auto& t = j["progressive_tightening"];
            cfg.tightening = TighteningSchedule{t.at("hi_increment").get<double>(), t.at("lo_increment").get<double>(),
                                                t.at("cap").get<double>()};
        } else {
            cfg.tightening.reset();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("policy document: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

PolicyConfig load_policy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open policy file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return policy_from_json(json::parse(buf.str()));
    } catch (const json::parse_error& e) {
        throw ConfigError("policy file '" + path + "' is not valid JSON: " + e.what());
    }
}

Thresholds effective_thresholds(const PolicyConfig& cfg, std::size_t already_revealed) {
    if (!cfg.tightening || already_revealed == 0) return {cfg.t_hi, cfg.t_lo};
    const auto& s = *cfg.tightening;
    const double n = static_cast<double>(already_revealed);
    return {std::min(s.cap, cfg.t_hi + s.hi_increment * n), std::min(s.cap, cfg.t_lo + s.lo_increment * n)};
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double reveal_probability(const PolicyConfig& cfg, const RubricVector& z, double overlap, std::size_t cluster) {
    if (cfg.w.size() != kRevealArity) throw ArityMismatch("reveal weights have the wrong length");
    if (cluster >= cfg.deltas.size())
        throw ArityMismatch("cluster " + std::to_string(cluster) + " outside the policy's " +
                            std::to_string(cfg.deltas.size()) + " clusters");
    std::array<double, kRevealArity> phi{};
    std::copy(z.values().begin(), z.values().end(), phi.begin());
    phi[kRubricDims] = overlap;
    return sigmoid(dot_with_delta(cfg.w, cfg.deltas[cluster], phi));
}

double address_probability(const PolicyConfig& cfg, const RubricVector& z, std::size_t cluster) {
    if (cfg.w_addr.size() != kAddressArity) throw ArityMismatch("address weights have the wrong length");
    if (cluster >= cfg.deltas_addr.size())
        throw ArityMismatch("cluster " + std::to_string(cluster) + " outside the policy's " +
                            std::to_string(cfg.deltas_addr.size()) + " clusters");
    return sigmoid(dot_with_delta(cfg.w_addr, cfg.deltas_addr[cluster], z.values()));
}

double logistic_objective(std::span<const PseudoLabeledTurn> turns, const std::vector<double>& w,
                          const std::vector<std::vector<double>>& deltas, double reg, double delta_reg_multiplier) {
    double nll = 0.0;
    for (const auto& t : turns) {
        const double s = dot_with_delta(w, deltas[t.cluster], t.features);
        // -log σ(s) for y=1, -log(1-σ(s)) for y=0
        nll += t.label == 1 ? softplus(-s) : softplus(s);
    }
    nll /= static_cast<double>(turns.size());
    double pen_w = 0.0, pen_d = 0.0;
    for (double v : w) pen_w += v * v;
    for (const auto& d : deltas)
        for (double v : d) pen_d += v * v;
    return nll + 0.5 * reg * pen_w + 0.5 * reg * delta_reg_multiplier * pen_d;
}

namespace {

struct Params {
    std::vector<double> w;
    std::vector<std::vector<double>> deltas;
};

void gradient(std::span<const PseudoLabeledTurn> turns, const Params& p, double reg, double mult, Params& g) {
    const std::size_t d = p.w.size();
    std::fill(g.w.begin(), g.w.end(), 0.0);
    for (auto& row : g.deltas) std::fill(row.begin(), row.end(), 0.0);
    for (const auto& t : turns) {
        const double r = sigmoid(dot_with_delta(p.w, p.deltas[t.cluster], t.features)) - t.label;
        auto& gd = g.deltas[t.cluster];
        for (std::size_t i = 0; i < d; ++i) {
            g.w[i] += r * t.features[i];
            gd[i] += r * t.features[i];
        }
    }
    const double n = static_cast<double>(turns.size());
    for (std::size_t i = 0; i < d; ++i) g.w[i] = g.w[i] / n + reg * p.w[i];
    for (std::size_t c = 0; c < g.deltas.size(); ++c)
        for (std::size_t i = 0; i < d; ++i) g.deltas[c][i] = g.deltas[c][i] / n + reg * mult * p.deltas[c][i];
}

double max_abs(const Params& g) {
    double m = 0.0;
    for (double v : g.w) m = std::max(m, std::abs(v));
    for (const auto& row : g.deltas)
        for (double v : row) m = std::max(m, std::abs(v));
    return m;
}

// Inner products over the flattened parameter vector.
double inner(const Params& a, const Params& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.w.size(); ++i) s += a.w[i] * b.w[i];
    for (std::size_t c = 0; c < a.deltas.size(); ++c)
        for (std::size_t i = 0; i < a.w.size(); ++i) s += a.deltas[c][i] * b.deltas[c][i];
    return s;
}

void axpy(Params& out, const Params& x, double step, const Params& dir) {
    for (std::size_t i = 0; i < x.w.size(); ++i) out.w[i] = x.w[i] - step * dir.w[i];
    for (std::size_t c = 0; c < x.deltas.size(); ++c)
        for (std::size_t i = 0; i < x.w.size(); ++i) out.deltas[c][i] = x.deltas[c][i] - step * dir.deltas[c][i];
}

}  // namespace

FitResult fit_logistic(std::span<const PseudoLabeledTurn> turns, double reg, const FitOptions& opts) {
    if (turns.empty()) throw DegenerateData("no labeled turns");
    if (reg < 0.0) throw ConfigError("regularization strength must be >= 0");
    const std::size_t d = turns.front().features.size();
    if (d == 0) throw ArityMismatch("labeled turns carry no features");
    std::size_t positives = 0;
    std::size_t max_cluster = 0;
    for (const auto& t : turns) {
        if (t.features.size() != d) throw ArityMismatch("labeled turns have inconsistent feature arity");
        if (t.label != 0 && t.label != 1) throw DegenerateData("labels must be 0 or 1");
        positives += static_cast<std::size_t>(t.label);
        max_cluster = std::max(max_cluster, t.cluster);
    }
    if (positives == 0 || positives == turns.size()) throw DegenerateData("labels are single-class");
    const std::size_t clusters = opts.cluster_count == 0 ? max_cluster + 1 : opts.cluster_count;
    if (max_cluster >= clusters) throw ArityMismatch("cluster id exceeds the requested cluster count");

    const double mult = opts.delta_reg_multiplier;
    Params p{std::vector<double>(d, 0.0), std::vector<std::vector<double>>(clusters, std::vector<double>(d, 0.0))};
    Params g = p, g_prev = p, trial = p, p_prev = p;

    FitResult result;
    double loss = logistic_objective(turns, p.w, p.deltas, reg, mult);
    result.loss_curve.push_back(loss);
    gradient(turns, p, reg, mult, g);
    double step = 1.0;
    bool have_prev = false;

    std::size_t iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        if (max_abs(g) < opts.tolerance) break;

        // Barzilai-Borwein trial step, safeguarded by Armijo backtracking so the
        // objective decreases on every accepted step.
        if (have_prev) {
            Params s = p, y = g;
            for (std::size_t i = 0; i < d; ++i) s.w[i] = p.w[i] - p_prev.w[i];
            for (std::size_t c = 0; c < clusters; ++c)
                for (std::size_t i = 0; i < d; ++i) s.deltas[c][i] = p.deltas[c][i] - p_prev.deltas[c][i];
            for (std::size_t i = 0; i < d; ++i) y.w[i] = g.w[i] - g_prev.w[i];
            for (std::size_t c = 0; c < clusters; ++c)
                for (std::size_t i = 0; i < d; ++i) y.deltas[c][i] = g.deltas[c][i] - g_prev.deltas[c][i];
            const double sy = inner(s, y);
            const double ss = inner(s, s);
            step = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e6) : 1.0;
        }

        const double gg = inner(g, g);
        double new_loss = loss;
        bool accepted = false;
        for (int bt = 0; bt < 80; ++bt) {
            axpy(trial, p, step, g);
            new_loss = logistic_objective(turns, trial.w, trial.deltas, reg, mult);
            if (new_loss <= loss - 1e-4 * step * gg) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no further decrease representable

        p_prev = p;
        g_prev = g;
        p = trial;
        loss = new_loss;
        have_prev = true;
        result.loss_curve.push_back(loss);
        gradient(turns, p, reg, mult, g);
    }

    result.final_gradient_norm = max_abs(g);
    result.converged = result.final_gradient_norm < opts.tolerance;
    result.iterations = iter;
    std::size_t correct = 0;
    for (const auto& t : turns) {
        const double prob = sigmoid(dot_with_delta(p.w, p.deltas[t.cluster], t.features));
        correct += ((prob >= 0.5 ? 1 : 0) == t.label) ? 1 : 0;
    }
    result.train_accuracy = static_cast<double>(correct) / static_cast<double>(turns.size());
    result.w = std::move(p.w);
    result.deltas = std::move(p.deltas);
    return result;
}

json fit_report_to_json(const FitResult& fit) {
    return {{"converged", fit.converged},
            {"status", fit.converged ? "converged" : "NonConvergence"},
            {"iterations", fit.iterations},
            {"final_gradient_norm", fit.final_gradient_norm},
            {"train_accuracy", fit.train_accuracy},
            {"loss_curve", fit.loss_curve}};
}

}  // namespace rpsim
