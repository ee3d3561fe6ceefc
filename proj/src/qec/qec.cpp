#include "atomread/qec/qec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "atomread/core/parallel.hpp"
#include "atomread/core/rng.hpp"
#include "atomread/core/tensor.hpp"

namespace atomread::qec {

double qec_cycle_time(const TimingParams& t) {
    return t.t_gate + t.t_readout + t.t_reset;
}

double exec_time_estimate(const TimingParams& t) {
    return static_cast<double>(t.n_tgates) * static_cast<double>(t.d_rounds) *
           qec_cycle_time(t);
}

double t_unpipelined(const TimingParams& t) {
    return static_cast<double>(t.d_rounds) *
           (t.t_gate + t.t_readout + t.t_classification);
}

double t_pipelined(const TimingParams& t) {
    return static_cast<double>(t.d_rounds) * (t.t_readout + t.t_gate) +
           (t.t_denoise + t.t_classification);
}

double pipeline_gap(const TimingParams& t) {
    return static_cast<double>(t.d_rounds - 1) * t.t_classification - t.t_denoise;
}

PauliProbs pauli_twirl_idle(double duration_s, const CoherenceParams& c) {
    require(duration_s >= 0.0, "pauli_twirl_idle: duration must be >= 0");
    require(c.t1 > 0.0 && c.t2 > 0.0, "pauli_twirl_idle: T1 and T2 must be positive");
    if (c.t2 > 2.0 * c.t1)
        throw std::invalid_argument("pauli_twirl_idle: T2 > 2*T1 violates the CP bound");
    PauliProbs p;
    const double decay1 = 1.0 - std::exp(-duration_s / c.t1);
    const double decay2 = 1.0 - std::exp(-duration_s / c.t2);
    p.px = decay1 / 4.0;
    p.py = decay1 / 4.0;
    p.pz = decay2 / 2.0 - decay1 / 4.0;
    if (p.pz < 0.0 && p.pz > -1e-12)
        p.pz = 0.0;  // rounding near t=0
    return p;
}

double NoiseCurves::ExpFit::eval(double t) const {
    return std::clamp(a * std::exp(-b * t) + c, 0.0, 1.0);
}

NoiseCurves::NoiseCurves(std::vector<double> durations_ms, std::vector<double> p_meas_points,
                         CoherenceParams coherence, double idle_overhead_ms)
    : durations_ms_(std::move(durations_ms)),
      p_meas_points_(std::move(p_meas_points)),
      coherence_(coherence),
      idle_overhead_ms_(idle_overhead_ms) {
    require(durations_ms_.size() == p_meas_points_.size(),
            "NoiseCurves: durations/p_meas length mismatch");
    require(!durations_ms_.empty(), "NoiseCurves: need at least one measured point");
    for (double p : p_meas_points_)
        require(p >= 0.0 && p <= 1.0, "NoiseCurves: p_meas outside [0,1]");

    // Fit a*exp(-b*t)+c: for each b on a log grid solve the 2x2 normal
    // equations for (a, c) and keep the best residual.
    const size_t n = durations_ms_.size();
    double best_res = std::numeric_limits<double>::infinity();
    for (int ib = 0; ib <= 400; ++ib) {
        const double b = std::pow(10.0, -2.0 + 3.0 * ib / 400.0);  // 0.01 .. 10 per ms
        double see = 0, se = 0, sey = 0, sy = 0;
        for (size_t i = 0; i < n; ++i) {
            const double e = std::exp(-b * durations_ms_[i]);
            see += e * e;
            se += e;
            sey += e * p_meas_points_[i];
            sy += p_meas_points_[i];
        }
        const double det = see * n - se * se;
        if (std::abs(det) < 1e-14)
            continue;
        const double a = (sey * n - se * sy) / det;
        const double c = (see * sy - se * sey) / det;
        double res = 0;
        for (size_t i = 0; i < n; ++i) {
            const double d = a * std::exp(-b * durations_ms_[i]) + c - p_meas_points_[i];
            res += d * d;
        }
        if (res < best_res) {
            best_res = res;
            fit_ = {a, b, c};
        }
    }
}

double NoiseCurves::p_meas(double duration_ms) const {
    for (size_t i = 0; i < durations_ms_.size(); ++i)
        if (std::abs(durations_ms_[i] - duration_ms) < 1e-9)
            return p_meas_points_[i];
    return fit_.eval(duration_ms);
}

PauliProbs NoiseCurves::idle_channel(double duration_ms) const {
    return pauli_twirl_idle((duration_ms + idle_overhead_ms_) * 1e-3, coherence_);
}

double defect_distance(const Defect& a, const Defect& b, int rounds) {
    const int di = std::abs(a.check - b.check);
    const int dt = std::abs(a.time - b.time);
    if (di == 0)
        return dt;
    // Horizontal moves need a level with space edges (< rounds); two defects
    // both sitting on the perfect closing round must detour one step down.
    const int detour = (a.time == rounds && b.time == rounds) ? 2 : 0;
    return di + dt + detour;
}

double boundary_distance(const Defect& a, int distance, int rounds, bool left) {
    const int horizontal = left ? a.check + 1 : distance - 1 - a.check;
    const int detour = (a.time == rounds) ? 1 : 0;
    return horizontal + detour;
}

MatchResult match_defects_bruteforce(const std::vector<Defect>& defects,
                                     int distance, int rounds) {
    const int m = static_cast<int>(defects.size());
    require(m <= 20, "match_defects_bruteforce: too many defects");
    struct Entry {
        double cost = std::numeric_limits<double>::infinity();
        int parity = 0;
        bool set = false;
    };
    std::vector<Entry> dp(static_cast<size_t>(1) << m);
    dp[0] = {0.0, 0, true};

    // dp over unmatched-defect subsets; always resolve the lowest set bit.
    for (uint32_t mask = 1; mask < dp.size(); ++mask) {
        int a = 0;
        while (!(mask & (1u << a)))
            ++a;
        Entry best;
        auto consider = [&best](double cost, int parity) {
            if (cost < best.cost) {
                best.cost = cost;
                best.parity = parity;
                best.set = true;
            }
        };
        const uint32_t rest_a = mask & ~(1u << a);
        // boundary options
        const Entry& sub = dp[rest_a];
        consider(sub.cost + boundary_distance(defects[a], distance, rounds, true),
                 sub.parity ^ 1);
        consider(sub.cost + boundary_distance(defects[a], distance, rounds, false),
                 sub.parity);
        // pair options
        for (int b = a + 1; b < m; ++b) {
            if (!(mask & (1u << b)))
                continue;
            const Entry& sub2 = dp[rest_a & ~(1u << b)];
            consider(sub2.cost + defect_distance(defects[a], defects[b], rounds),
                     sub2.parity);
        }
        dp[mask] = best;
    }
    const Entry& full = dp[dp.size() - 1];
    return {full.cost, full.parity, true};
}

MatchResult match_defects_greedy(const std::vector<Defect>& defects,
                                 int distance, int rounds) {
    std::vector<int> open(defects.size());
    for (size_t i = 0; i < open.size(); ++i)
        open[i] = static_cast<int>(i);

    double weight = 0.0;
    int parity = 0;
    while (!open.empty()) {
        double best = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;  // bj == -1 left boundary, -2 right boundary
        for (size_t i = 0; i < open.size(); ++i) {
            const Defect& a = defects[open[i]];
            const double bl = boundary_distance(a, distance, rounds, true);
            if (bl < best) {
                best = bl;
                bi = static_cast<int>(i);
                bj = -1;
            }
            const double br = boundary_distance(a, distance, rounds, false);
            if (br < best) {
                best = br;
                bi = static_cast<int>(i);
                bj = -2;
            }
            for (size_t j = i + 1; j < open.size(); ++j) {
                const double d = defect_distance(a, defects[open[j]], rounds);
                if (d < best) {
                    best = d;
                    bi = static_cast<int>(i);
                    bj = static_cast<int>(j);
                }
            }
        }
        weight += best;
        if (bj == -1)
            parity ^= 1;
        if (bj >= 0) {
            open.erase(open.begin() + bj);  // j > i, erase j first
            open.erase(open.begin() + bi);
        } else {
            open.erase(open.begin() + bi);
        }
    }
    return {weight, parity, false};
}

MatchResult match_defects(const std::vector<Defect>& defects, int distance,
                          int rounds, int max_bruteforce_defects) {
    if (static_cast<int>(defects.size()) <= max_bruteforce_defects)
        return match_defects_bruteforce(defects, distance, rounds);
    return match_defects_greedy(defects, distance, rounds);
}

ShotOutcome simulate_repetition_shot(int distance, int rounds, double p_flip,
                                     double p_meas, uint64_t seed,
                                     int max_bruteforce_defects) {
    require(distance >= 3 && distance % 2 == 1, "repetition code distance must be odd >= 3");
    require(rounds >= 1, "rounds must be >= 1");
    require(p_flip >= 0.0 && p_flip <= 1.0, "p_flip outside [0,1]");
    require(p_meas >= 0.0 && p_meas <= 1.0, "p_meas outside [0,1]");

    auto rng = make_engine(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    const int checks = distance - 1;
    std::vector<uint8_t> data(distance, 0);
    std::vector<uint8_t> prev_meas(checks, 0);
    std::vector<Defect> defects;

    for (int t = 0; t < rounds; ++t) {
        for (int j = 0; j < distance; ++j)
            if (uni(rng) < p_flip)
                data[j] ^= 1;
        for (int i = 0; i < checks; ++i) {
            uint8_t m = static_cast<uint8_t>(data[i] ^ data[i + 1]);
            if (uni(rng) < p_meas)
                m ^= 1;
            if (m != prev_meas[i])
                defects.push_back({i, t});
            prev_meas[i] = m;
        }
    }
    // closing perfect round
    for (int i = 0; i < checks; ++i) {
        const uint8_t m = static_cast<uint8_t>(data[i] ^ data[i + 1]);
        if (m != prev_meas[i])
            defects.push_back({i, rounds});
    }

    const MatchResult match =
        match_defects(defects, distance, rounds, max_bruteforce_defects);

    ShotOutcome out;
    out.defect_count = static_cast<int>(defects.size());
    out.decoded_exactly = match.exact;
    // Correction flips data qubit 0 once per left-boundary match; residual
    // error is logical iff it disagrees with the actual flip of qubit 0.
    out.logical_error = (match.left_boundary_parity != data[0]);
    return out;
}

std::vector<LerPoint> ler_repetition_sweep(const std::vector<double>& durations_ms,
                                           const NoiseCurves& noise,
                                           const RepCodeConfig& config,
                                           const TimingParams& timing) {
    require(!durations_ms.empty(), "ler sweep: empty duration list");
    require(config.shots >= 1, "ler sweep: shots must be >= 1");

    const double overhead_ms = (timing.t_gate + timing.t_reset) * 1e3;
    std::vector<LerPoint> out;
    for (size_t di = 0; di < durations_ms.size(); ++di) {
        const double dur = durations_ms[di];
        const double p_meas = noise.p_meas(dur);
        const PauliProbs ch = noise.idle_channel(dur + overhead_ms);
        const double p_flip = ch.px + ch.py;
        require(p_flip >= 0.0 && p_flip <= 1.0, "ler sweep: p_flip outside [0,1]");

        std::vector<uint8_t> fails(static_cast<size_t>(config.shots), 0);
        parallel_for(config.shots, [&](int64_t s) {
            const uint64_t shot_seed =
                hash_seed(config.seed, (static_cast<uint64_t>(di) << 40) ^
                                           static_cast<uint64_t>(s));
            const ShotOutcome o =
                simulate_repetition_shot(config.distance, config.rounds, p_flip,
                                         p_meas, shot_seed,
                                         config.max_bruteforce_defects);
            fails[static_cast<size_t>(s)] = o.logical_error ? 1 : 0;
        });
        long long nfail = 0;
        for (uint8_t f : fails)
            nfail += f;
        LerPoint pt;
        pt.duration_ms = dur;
        pt.p_meas = p_meas;
        pt.p_flip = p_flip;
        pt.shots = config.shots;
        pt.ler = static_cast<double>(nfail) / static_cast<double>(config.shots);
        pt.std_error = std::sqrt(std::max(pt.ler * (1.0 - pt.ler), 1e-12) /
                                 static_cast<double>(config.shots));
        out.push_back(pt);
    }
    return out;
}

double find_optimal_duration(const std::vector<LerPoint>& sweep) {
    require(!sweep.empty(), "find_optimal_duration: empty sweep");
    size_t best = 0;
    for (size_t i = 1; i < sweep.size(); ++i) {
        const bool better = sweep[i].ler < sweep[best].ler;
        const bool tie_shorter = sweep[i].ler == sweep[best].ler &&
                                 sweep[i].duration_ms < sweep[best].duration_ms;
        if (better || tie_shorter)
            best = i;
    }
    return sweep[best].duration_ms;
}

}  // namespace atomread::qec
