#include "qosec/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

#include "qosec/errors.hpp"
#include "qosec/secrecy_analysis.hpp"

namespace qosec {

namespace {

// Encoding order: zeta, public power, confidential power, slot threshold
// (all normalized to their boxes), then the frame-length divisor index.
constexpr int kNumCont = 4;
constexpr int kCatGene = 4;
constexpr int kElites = 2;
constexpr double kZetaFloor = 1e-3;

struct Genome {
    std::array<double, kNumCont> cont{};
    int ls_idx = 0;
};

struct Boxes {
    std::array<double, kNumCont> lo{};
    std::array<double, kNumCont> hi{};
};

struct EvalInfo {
    double fitness = std::numeric_limits<double>::infinity();
    double qvp_value = 1.0;
    double ip_value = 1.0;
    bool evaluable = false;
    bool exact_feasible = false;
};

Boxes gene_boxes(const OptProblem& problem) {
    Boxes b;
    const double p_lo = problem.cfg.gamma_min / problem.cfg.gamma_max;
    b.lo = {kZetaFloor, p_lo * (1.0 + 1e-6), p_lo * (1.0 + 1e-6), 0.0};
    b.hi = {1.0, 1.0, 1.0, 1.0};
    return b;
}

double nu_ceiling(const OptProblem& problem) {
    return 4.0 * static_cast<double>(problem.cfg.n_T);
}

TxParams decode(const OptProblem& problem,
                const std::vector<long long>& divisors, const Genome& g) {
    TxParams tx;
    tx.zeta = g.cont[0];
    tx.P_p = g.cont[1] * problem.cfg.sigma_n * problem.cfg.gamma_max;
    tx.P_s = g.cont[2] * problem.cfg.sigma_n * problem.cfg.gamma_max;
    tx.nu = g.cont[3] * nu_ceiling(problem);
    tx.L_s = static_cast<int>(divisors[static_cast<std::size_t>(g.ls_idx)]);
    return tx;
}

EvalInfo evaluate(const OptProblem& problem,
                  const std::vector<long long>& divisors, const Boxes& boxes,
                  double penalty, const Genome& g) {
    EvalInfo info;
    int box_violations = 0;
    for (int i = 0; i < kNumCont; ++i)
        if (g.cont[i] < boxes.lo[i] || g.cont[i] > boxes.hi[i]) ++box_violations;
    if (g.ls_idx < 0 || g.ls_idx >= static_cast<int>(divisors.size())) {
        // No decodable frame length: nothing to evaluate.
        info.fitness = 2.0 * penalty * (2.0 + box_violations);
        return info;
    }

    const TxParams tx = decode(problem, divisors, g);
    try {
        const QvpBreakdown b = qvp(problem.cfg, tx, problem.img, problem.scenario);
        const double ip = intercept_probability(problem.cfg, tx, problem.scenario);
        info.evaluable = true;
        info.qvp_value = b.qvp;
        info.ip_value = ip;
        info.fitness = b.qvp + penalty * std::max(0.0, ip - problem.eps_IP) +
                       penalty * box_violations;
        info.exact_feasible = box_violations == 0 && ip <= problem.eps_IP;
    } catch (const ConfigError&) {
    } catch (const InfeasibleError&) {
    } catch (const NumericalError&) {
    } catch (const UnsupportedError&) {
    }
    if (!info.evaluable)
        info.fitness = 2.0 * penalty * (1.0 + box_violations);
    return info;
}

struct ActiveGenes {
    std::array<bool, kNumCont> cont{};
    bool cat = false;
};

ActiveGenes active_genes(const GenePins& pins, std::size_t cardinality) {
    ActiveGenes a;
    a.cont = {!pins.zeta.has_value(), !pins.p_pub_norm.has_value(),
              !pins.p_sec_norm.has_value(), !pins.nu_norm.has_value()};
    a.cat = !pins.ls_index.has_value() && cardinality > 1;
    return a;
}

void apply_pins(const GenePins& pins, Genome& g) {
    if (pins.zeta) g.cont[0] = *pins.zeta;
    if (pins.p_pub_norm) g.cont[1] = *pins.p_pub_norm;
    if (pins.p_sec_norm) g.cont[2] = *pins.p_sec_norm;
    if (pins.nu_norm) g.cont[3] = *pins.nu_norm;
    if (pins.ls_index) g.ls_idx = *pins.ls_index;
}

double clip(double x, double lo, double hi) {
    return std::min(hi, std::max(lo, x));
}

int random_index(Rng& rng, std::size_t cardinality) {
    const auto idx = static_cast<int>(rng.uniform01() *
                                      static_cast<double>(cardinality));
    return std::min(idx, static_cast<int>(cardinality) - 1);
}

// Simulated-binary crossover of one gene pair, children clipped to the box.
void sbx_gene(double& a, double& b, double lo, double hi, double eta, Rng& rng) {
    const double u = rng.uniform01_pos();
    const double exponent = 1.0 / (eta + 1.0);
    const double beta = u <= 0.5 ? std::pow(2.0 * u, exponent)
                                 : std::pow(1.0 / (2.0 * (1.0 - u)), exponent);
    const double c1 = 0.5 * ((1.0 + beta) * a + (1.0 - beta) * b);
    const double c2 = 0.5 * ((1.0 - beta) * a + (1.0 + beta) * b);
    a = clip(c1, lo, hi);
    b = clip(c2, lo, hi);
}

// Each gene draws from its own substream keyed by a stable gene id, so the
// realized randomness does not depend on the order genes are processed in or
// on which other genes are pinned.
void make_children(const GaSettings& s, const Boxes& boxes,
                   const ActiveGenes& active, const GenePins& pins,
                   std::size_t cardinality, std::uint64_t base, Genome& c1,
                   Genome& c2) {
    for (int g = 0; g < kNumCont; ++g) {
        if (!active.cont[g]) continue;
        Rng sub = Rng::substream(base, static_cast<std::uint64_t>(g));
        if (sub.uniform01() < s.crossover_prob)
            sbx_gene(c1.cont[g], c2.cont[g], boxes.lo[g], boxes.hi[g], s.sbx_eta,
                     sub);
        const double width = boxes.hi[g] - boxes.lo[g];
        for (Genome* child : {&c1, &c2}) {
            if (sub.uniform01() < s.mutation_prob)
                child->cont[g] = clip(
                    child->cont[g] + sub.normal() * s.mutation_scale * width,
                    boxes.lo[g], boxes.hi[g]);
        }
    }
    if (active.cat) {
        Rng sub = Rng::substream(base, static_cast<std::uint64_t>(kCatGene));
        if (sub.uniform01() < s.crossover_prob && sub.uniform01() < 0.5)
            std::swap(c1.ls_idx, c2.ls_idx);
        for (Genome* child : {&c1, &c2}) {
            if (sub.uniform01() < s.mutation_prob)
                child->ls_idx = random_index(sub, cardinality);
        }
    }
    apply_pins(pins, c1);
    apply_pins(pins, c2);
}

Genome random_genome(const Boxes& boxes, const ActiveGenes& active,
                     const GenePins& pins, std::size_t cardinality,
                     std::uint64_t base) {
    Genome g;
    for (int i = 0; i < kNumCont; ++i) {
        if (!active.cont[i]) continue;
        Rng sub = Rng::substream(base, static_cast<std::uint64_t>(i));
        g.cont[i] = boxes.lo[i] + sub.uniform01() * (boxes.hi[i] - boxes.lo[i]);
    }
    if (active.cat) {
        Rng sub = Rng::substream(base, static_cast<std::uint64_t>(kCatGene));
        g.ls_idx = random_index(sub, cardinality);
    }
    apply_pins(pins, g);
    return g;
}

int tournament_pick(const std::vector<EvalInfo>& infos, int k, Rng& rng) {
    const std::size_t n = infos.size();
    int best = random_index(rng, n);
    for (int i = 1; i < k; ++i) {
        const int challenger = random_index(rng, n);
        if (infos[static_cast<std::size_t>(challenger)].fitness <
            infos[static_cast<std::size_t>(best)].fitness)
            best = challenger;
    }
    return best;
}

OptResult finish(const OptProblem& problem,
                 const std::vector<long long>& divisors, const Boxes& boxes,
                 double penalty, bool have_feasible, const Genome& best_feasible,
                 const Genome& best_any, long long evaluations,
                 std::vector<double> history) {
    OptResult result;
    const Genome& chosen = have_feasible ? best_feasible : best_any;
    // Final exact re-check: the verdict comes from a fresh evaluation of the
    // analytic quantities, never from accumulated penalty terms.
    const EvalInfo info = evaluate(problem, divisors, boxes, penalty, chosen);
    result.tx_star = decode(problem, divisors, chosen);
    result.qvp_star = info.evaluable ? info.qvp_value : 1.0;
    result.feasible = info.exact_feasible;
    result.evaluations = evaluations;
    result.history = std::move(history);
    return result;
}

} // namespace

void OptProblem::validate() const {
    cfg.validate();
    img.validate();
    scenario.validate();
    if (!(eps_IP > 0.0) || !(eps_IP < 1.0))
        throw ConfigError("problem.eps_IP: must lie strictly between 0 and 1");
    if (img.N_roi < 1)
        throw ConfigError(
            "problem.img.N_roi: optimization needs at least one confidential "
            "packet so the frame-length divisor set is nonempty");
}

void GaSettings::validate() const {
    if (population < kElites + 2)
        throw ConfigError("ga.population: must be at least 4");
    if (generations < 1) throw ConfigError("ga.generations: must be at least 1");
    if (tournament < 1 || tournament > population)
        throw ConfigError("ga.tournament: must lie in [1, population]");
    if (!(crossover_prob >= 0.0) || !(crossover_prob <= 1.0))
        throw ConfigError("ga.crossover_prob: must lie in [0, 1]");
    if (!(mutation_prob >= 0.0) || !(mutation_prob <= 1.0))
        throw ConfigError("ga.mutation_prob: must lie in [0, 1]");
    if (!(sbx_eta > 0.0)) throw ConfigError("ga.sbx_eta: must be positive");
    if (!(mutation_scale > 0.0))
        throw ConfigError("ga.mutation_scale: must be positive");
    if (!(penalty > 0.0)) throw ConfigError("ga.penalty: must be positive");
}

OptResult solve_pinned(const OptProblem& problem, const GaSettings& settings,
                       Rng& rng, const GenePins& pins) {
    problem.validate();
    settings.validate();
    const std::vector<long long> divisors = divisors_ascending(problem.img.N_roi);
    if (pins.ls_index &&
        (*pins.ls_index < 0 ||
         *pins.ls_index >= static_cast<int>(divisors.size())))
        throw ConfigError("pins.ls_index: outside the divisor set");

    const Boxes boxes = gene_boxes(problem);
    const ActiveGenes active = active_genes(pins, divisors.size());
    const double penalty = settings.penalty;

    const bool anything_free =
        active.cat || std::any_of(active.cont.begin(), active.cont.end(),
                                  [](bool b) { return b; });
    if (!anything_free) {
        // Fully determined strategy: one evaluation settles it.
        Genome g;
        g.cont = {0.5, boxes.hi[1], boxes.hi[2], 0.25};
        apply_pins(pins, g);
        const EvalInfo info = evaluate(problem, divisors, boxes, penalty, g);
        return finish(problem, divisors, boxes, penalty, info.exact_feasible, g,
                      g, 1, {info.fitness});
    }

    const int pop_size = settings.population;
    std::vector<Genome> pop(static_cast<std::size_t>(pop_size));
    std::vector<EvalInfo> infos(static_cast<std::size_t>(pop_size));

    // Structured starting points: a lattice of full-power candidates covering
    // every frame-length category at several power splits and gate levels, so
    // the categorical gene starts with a foothold in each basin. The rest of
    // the population is uniform in the boxes.
    int seeded = 0;
    const int seed_cap = std::min(pop_size, pop_size / 2 + 2);
    const double zeta_lattice[] = {0.5, 0.25, 0.75};
    for (int zi = 0; zi < 3 && seeded < seed_cap; ++zi) {
        for (std::size_t j = 0; j < divisors.size() && seeded < seed_cap; ++j) {
            Genome& g = pop[static_cast<std::size_t>(seeded)];
            g.cont = {clip(zeta_lattice[zi], boxes.lo[0], boxes.hi[0]),
                      boxes.hi[1], boxes.hi[2],
                      clip(0.15 + 0.35 * zi, boxes.lo[3], boxes.hi[3])};
            g.ls_idx = static_cast<int>(j);
            apply_pins(pins, g);
            ++seeded;
        }
    }
    for (int i = seeded; i < pop_size; ++i)
        pop[static_cast<std::size_t>(i)] = random_genome(
            boxes, active, pins, divisors.size(), rng.next_u64());

    long long evaluations = 0;
    auto evaluate_range = [&](int first) {
#if defined(QOSEC_HAVE_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
        for (int i = first; i < pop_size; ++i)
            infos[static_cast<std::size_t>(i)] = evaluate(
                problem, divisors, boxes, penalty, pop[static_cast<std::size_t>(i)]);
        evaluations += pop_size - first;
    };

    evaluate_range(0);

    Genome best_feasible{}, best_any{};
    double best_feasible_qvp = std::numeric_limits<double>::infinity();
    double best_any_fitness = std::numeric_limits<double>::infinity();
    bool have_feasible = false;
    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(settings.generations) + 1);

    // Champion per frame-length category, kept so the refinement stage can
    // re-polish each category instead of trusting a single winner.
    std::vector<Genome> cat_best(divisors.size());
    std::vector<double> cat_best_fitness(
        divisors.size(), std::numeric_limits<double>::infinity());

    auto track = [&]() {
        double gen_best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < pop_size; ++i) {
            const EvalInfo& info = infos[static_cast<std::size_t>(i)];
            gen_best = std::min(gen_best, info.fitness);
            if (info.fitness < best_any_fitness) {
                best_any_fitness = info.fitness;
                best_any = pop[static_cast<std::size_t>(i)];
            }
            if (info.exact_feasible && info.qvp_value < best_feasible_qvp) {
                best_feasible_qvp = info.qvp_value;
                best_feasible = pop[static_cast<std::size_t>(i)];
                have_feasible = true;
            }
            const int c = pop[static_cast<std::size_t>(i)].ls_idx;
            if (c >= 0 && c < static_cast<int>(divisors.size()) &&
                info.fitness < cat_best_fitness[static_cast<std::size_t>(c)]) {
                cat_best_fitness[static_cast<std::size_t>(c)] = info.fitness;
                cat_best[static_cast<std::size_t>(c)] =
                    pop[static_cast<std::size_t>(i)];
            }
        }
        history.push_back(gen_best);
    };
    track();

    std::vector<Genome> next(static_cast<std::size_t>(pop_size));
    std::vector<EvalInfo> next_infos(static_cast<std::size_t>(pop_size));
    for (int gen = 0; gen < settings.generations; ++gen) {
        // Elitism: the two fittest individuals survive unchanged (ties broken
        // by position for determinism).
        int e0 = 0;
        for (int i = 1; i < pop_size; ++i)
            if (infos[static_cast<std::size_t>(i)].fitness <
                infos[static_cast<std::size_t>(e0)].fitness)
                e0 = i;
        int e1 = e0 == 0 ? 1 : 0;
        for (int i = 0; i < pop_size; ++i) {
            if (i == e0) continue;
            if (infos[static_cast<std::size_t>(i)].fitness <
                infos[static_cast<std::size_t>(e1)].fitness)
                e1 = i;
        }
        next[0] = pop[static_cast<std::size_t>(e0)];
        next_infos[0] = infos[static_cast<std::size_t>(e0)];
        next[1] = pop[static_cast<std::size_t>(e1)];
        next_infos[1] = infos[static_cast<std::size_t>(e1)];

        int filled = kElites;
        while (filled < pop_size) {
            const int pa = tournament_pick(infos, settings.tournament, rng);
            const int pb = tournament_pick(infos, settings.tournament, rng);
            Genome c1 = pop[static_cast<std::size_t>(pa)];
            Genome c2 = pop[static_cast<std::size_t>(pb)];
            make_children(settings, boxes, active, pins, divisors.size(),
                          rng.next_u64(), c1, c2);
            next[static_cast<std::size_t>(filled++)] = c1;
            if (filled < pop_size) next[static_cast<std::size_t>(filled++)] = c2;
        }

        pop.swap(next);
        infos.swap(next_infos);
        evaluate_range(kElites);
        track();
    }

    // Deterministic refinement stage. Each frame-length category's champion
    // gets a short shrink-step pattern search on the free continuous genes
    // (coordinate steps plus paired diagonal moves, so constraint boundaries
    // oblique to the axes can be tracked); the best polished candidate then
    // receives a deep polish. Everything runs on the same penalized fitness
    // the evolution used, within a bounded evaluation budget.
    {
        long long budget = 8000;
        auto consider = [&](const Genome& cand, const EvalInfo& info) {
            if (info.fitness < best_any_fitness) {
                best_any_fitness = info.fitness;
                best_any = cand;
            }
            if (info.exact_feasible && info.qvp_value < best_feasible_qvp) {
                best_feasible_qvp = info.qvp_value;
                best_feasible = cand;
                have_feasible = true;
            }
        };
        auto polish = [&](Genome g, EvalInfo g_info, double step_floor,
                          long long max_evals) {
            long long local = std::min(max_evals, budget);
            double step = 0.05;
            while (step >= step_floor && local > 0) {
                bool improved = false;
                for (int d = 0; d < kNumCont && local > 0; ++d) {
                    if (!active.cont[d]) continue;
                    const double width = boxes.hi[d] - boxes.lo[d];
                    for (const double sgn : {1.0, -1.0}) {
                        Genome cand = g;
                        cand.cont[d] = clip(g.cont[d] + sgn * step * width,
                                            boxes.lo[d], boxes.hi[d]);
                        if (cand.cont[d] == g.cont[d]) continue;
                        const EvalInfo info =
                            evaluate(problem, divisors, boxes, penalty, cand);
                        ++evaluations;
                        --budget;
                        --local;
                        consider(cand, info);
                        if (info.fitness < g_info.fitness) {
                            g = cand;
                            g_info = info;
                            improved = true;
                            break;
                        }
                    }
                }
                for (int d1 = 0; d1 < kNumCont && local > 0; ++d1) {
                    if (!active.cont[d1]) continue;
                    for (int d2 = d1 + 1; d2 < kNumCont && local > 0; ++d2) {
                        if (!active.cont[d2]) continue;
                        const double w1 = boxes.hi[d1] - boxes.lo[d1];
                        const double w2 = boxes.hi[d2] - boxes.lo[d2];
                        for (const double s1 : {1.0, -1.0}) {
                            for (const double s2 : {1.0, -1.0}) {
                                Genome cand = g;
                                cand.cont[d1] = clip(g.cont[d1] + s1 * step * w1,
                                                     boxes.lo[d1], boxes.hi[d1]);
                                cand.cont[d2] = clip(g.cont[d2] + s2 * step * w2,
                                                     boxes.lo[d2], boxes.hi[d2]);
                                if (cand.cont[d1] == g.cont[d1] &&
                                    cand.cont[d2] == g.cont[d2])
                                    continue;
                                const EvalInfo info =
                                    evaluate(problem, divisors, boxes, penalty, cand);
                                ++evaluations;
                                --budget;
                                --local;
                                consider(cand, info);
                                if (info.fitness < g_info.fitness) {
                                    g = cand;
                                    g_info = info;
                                    improved = true;
                                }
                            }
                        }
                    }
                }
                if (!improved) step *= 0.5;
            }
            return std::make_pair(g, g_info);
        };

        Genome best_g = have_feasible ? best_feasible : best_any;
        EvalInfo best_info = evaluate(problem, divisors, boxes, penalty, best_g);
        ++evaluations;
        consider(best_g, best_info);

        if (active.cat) {
            for (std::size_t c = 0; c < divisors.size() && budget > 0; ++c) {
                if (!std::isfinite(cat_best_fitness[c])) continue;
                Genome g = cat_best[c];
                EvalInfo info = evaluate(problem, divisors, boxes, penalty, g);
                ++evaluations;
                --budget;
                consider(g, info);
                const auto polished = polish(g, info, 1e-4, 320);
                if (polished.second.fitness < best_info.fitness) {
                    best_g = polished.first;
                    best_info = polished.second;
                }
            }
        }
        polish(best_g, best_info, 1e-9, budget);
    }

    return finish(problem, divisors, boxes, penalty, have_feasible,
                  best_feasible, best_any, evaluations, std::move(history));
}

OptResult solve(const OptProblem& problem, const GaSettings& settings,
                Rng& rng) {
    return solve_pinned(problem, settings, rng, GenePins{});
}

OptResult baseline_mp(const OptProblem& problem, const GaSettings& settings,
                      Rng& rng) {
    GenePins pins;
    pins.p_pub_norm = 1.0;
    pins.p_sec_norm = 1.0;
    return solve_pinned(problem, settings, rng, pins);
}

OptResult baseline_ep(const OptProblem& problem, const GaSettings& settings,
                      Rng& rng) {
    GenePins pins;
    pins.zeta = 0.5;
    return solve_pinned(problem, settings, rng, pins);
}

} // namespace qosec
