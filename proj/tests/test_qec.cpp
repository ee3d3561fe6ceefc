#include <doctest.h>

#include <cmath>
#include <random>

#include "atomread/core/parallel.hpp"
#include "atomread/core/rng.hpp"
#include "atomread/qec/qec.hpp"
#include "support/rep_code_oracle.hpp"

using namespace atomread;
using namespace atomread::qec;

TEST_CASE("cycle time and execution estimate") {
    TimingParams t;
    t.t_gate = 1e-3;
    t.t_readout = 10e-3;
    t.t_reset = 1e-3;
    CHECK(qec_cycle_time(t) == doctest::Approx(12e-3).epsilon(1e-12));

    TimingParams zero;
    zero.t_gate = zero.t_readout = zero.t_reset = 0.0;
    CHECK(qec_cycle_time(zero) == 0.0);

    // readout dominates the cycle for realistic presets
    TimingParams quera;
    quera.t_gate = 0.4e-6;
    quera.t_readout = 10e-3;
    quera.t_reset = 1e-3;
    const double frac = quera.t_readout / qec_cycle_time(quera);
    CHECK(frac > 0.75);
    CHECK(frac < 0.99);

    TimingParams e;
    e.t_gate = 1e-3;
    e.t_readout = 10e-3;
    e.t_reset = 1e-3;
    e.n_tgates = 100;
    e.d_rounds = 11;
    CHECK(exec_time_estimate(e) == doctest::Approx(100 * 11 * 12e-3).epsilon(1e-12));
    e.d_rounds = 22;
    CHECK(exec_time_estimate(e) == doctest::Approx(2 * 100 * 11 * 12e-3).epsilon(1e-12));
}

TEST_CASE("pipelining model reproduces the reference latencies") {
    TimingParams t;
    t.d_rounds = 100;
    t.t_readout = 1.5e-3;
    t.t_gate = 5e-6;
    t.t_classification = 4e-4;
    CHECK(t_unpipelined(t) == doctest::Approx(0.1905).epsilon(1e-12));

    t.t_denoise = 2e-3 - t.t_classification;  // denoise + classify = 2 ms
    CHECK(t_pipelined(t) == doctest::Approx(0.1525).epsilon(1e-12));

    // d = 1 with no denoise cost: both schedules coincide
    TimingParams one;
    one.d_rounds = 1;
    one.t_denoise = 0.0;
    CHECK(t_pipelined(one) == doctest::Approx(t_unpipelined(one)).epsilon(1e-15));
}

TEST_CASE("gap identity holds on random draws") {
    auto rng = make_engine(42);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int k = 0; k < 10000; ++k) {
        TimingParams t;
        t.t_gate = uni(rng) * 1e-4;
        t.t_readout = uni(rng) * 1e-2;
        t.t_classification = uni(rng) * 1e-3;
        t.t_denoise = uni(rng) * 1e-2;
        t.t_reset = uni(rng) * 1e-3;
        t.d_rounds = 1 + static_cast<long long>(uni(rng) * 1000);
        const double gap = t_unpipelined(t) - t_pipelined(t);
        const double expect = (t.d_rounds - 1) * t.t_classification - t.t_denoise;
        CHECK(gap == doctest::Approx(expect).epsilon(1e-9));
        CHECK(pipeline_gap(t) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("pauli twirl limits and closed forms") {
    CoherenceParams c{0.05, 0.05};
    const auto zero = pauli_twirl_idle(0.0, c);
    CHECK(zero.px == 0.0);
    CHECK(zero.py == 0.0);
    CHECK(zero.pz == 0.0);

    const auto inf = pauli_twirl_idle(1e6, c);
    CHECK(inf.px == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(inf.py == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(inf.pz == doctest::Approx(0.25).epsilon(1e-9));

    const auto e1 = pauli_twirl_idle(0.05, c);  // t = T1 = T2
    const double expect = (1.0 - std::exp(-1.0)) / 4.0;
    CHECK(e1.px == doctest::Approx(expect).epsilon(1e-12));
    CHECK(e1.py == doctest::Approx(expect).epsilon(1e-12));
    CHECK(e1.pz == doctest::Approx(expect).epsilon(1e-12));

    CHECK_THROWS(pauli_twirl_idle(1.0, CoherenceParams{0.1, 0.3}));  // T2 > 2 T1

    // monotone in duration, CP bound respected
    CoherenceParams c2{0.2, 0.25};
    double last = -1.0;
    for (double t = 0.0; t <= 2.0; t += 0.05) {
        const auto p = pauli_twirl_idle(t, c2);
        CHECK(p.total() >= last - 1e-15);
        CHECK(p.total() <= 0.75 + 1e-12);
        CHECK(p.px >= 0.0);
        CHECK(p.pz >= 0.0);
        last = p.total();
    }
}

TEST_CASE("noise curve fit recovers an exponential family") {
    std::vector<double> ts{1.5, 2.2, 3.2, 4.7, 6.8, 10.0};
    std::vector<double> ps;
    for (double t : ts)
        ps.push_back(0.08 * std::exp(-0.9 * t) + 0.004);
    NoiseCurves curves(ts, ps, CoherenceParams{0.2, 0.25});
    // measured points returned verbatim
    CHECK(curves.p_meas(1.5) == doctest::Approx(ps[0]).epsilon(1e-12));
    // fit interpolates off-grid within a tight margin
    const double truth = 0.08 * std::exp(-0.9 * 2.8) + 0.004;
    CHECK(curves.p_meas(2.8) == doctest::Approx(truth).epsilon(0.05));
}

TEST_CASE("brute-force matching equals the exhaustive-correction oracle") {
    const int d = 3, rounds = 5;
    test_support::RepCodeOracle oracle(d, rounds);
    auto rng = make_engine(2024);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    int tested = 0;
    int attempts = 0;
    while (tested < 1000 && attempts < 20000) {
        ++attempts;
        const double p_data = 0.02 + 0.12 * uni(rng);
        const double p_meas = 0.02 + 0.12 * uni(rng);

        // draw an explicit error pattern and derive its defects
        std::vector<std::vector<uint8_t>> flips(rounds, std::vector<uint8_t>(d, 0));
        std::vector<std::vector<uint8_t>> merr(rounds, std::vector<uint8_t>(d - 1, 0));
        for (int t = 0; t < rounds; ++t) {
            for (int j = 0; j < d; ++j)
                flips[t][j] = uni(rng) < p_data;
            for (int i = 0; i < d - 1; ++i)
                merr[t][i] = uni(rng) < p_meas;
        }
        std::vector<uint8_t> state(d, 0), prev(d - 1, 0);
        std::vector<Defect> defects;
        uint32_t mask = 0;
        for (int t = 0; t < rounds; ++t) {
            for (int j = 0; j < d; ++j)
                state[j] ^= flips[t][j];
            for (int i = 0; i < d - 1; ++i) {
                const uint8_t m = state[i] ^ state[i + 1] ^ merr[t][i];
                if (m != prev[i]) {
                    defects.push_back({i, t});
                    mask ^= 1u << oracle.defect_bit(i, t);
                }
                prev[i] = m;
            }
        }
        for (int i = 0; i < d - 1; ++i) {
            const uint8_t m = state[i] ^ state[i + 1];
            if (m != prev[i]) {
                defects.push_back({i, rounds});
                mask ^= 1u << oracle.defect_bit(i, rounds);
            }
        }
        if (defects.size() > 10 || defects.empty())
            continue;

        const MatchResult match = match_defects_bruteforce(defects, d, rounds);
        const auto [w_even, w_odd] = oracle.min_weights(mask);
        const int oracle_min = std::min(w_even, w_odd);
        REQUIRE(match.weight == doctest::Approx(oracle_min).epsilon(1e-12));
        if (w_even != w_odd) {
            const int oracle_parity = w_odd < w_even ? 1 : 0;
            REQUIRE(match.left_boundary_parity == oracle_parity);
        }
        ++tested;
    }
    CHECK(tested == 1000);
}

TEST_CASE("repetition code closed form: distance 3, one perfect-measurement round") {
    const double p = 0.08;
    const long long shots = 100000;
    long long fails = 0;
    for (long long s = 0; s < shots; ++s) {
        const auto o = simulate_repetition_shot(3, 1, p, 0.0, hash_seed(9, s));
        fails += o.logical_error;
    }
    const double ler = static_cast<double>(fails) / shots;
    const double expect = 3 * p * p * (1 - p) + p * p * p;  // majority-vote failure
    const double sigma = std::sqrt(expect * (1 - expect) / shots);
    CHECK(std::abs(ler - expect) < 3 * sigma);
}

TEST_CASE("no noise, no logical errors") {
    for (int s = 0; s < 50; ++s) {
        const auto o = simulate_repetition_shot(5, 10, 0.0, 0.0, s);
        CHECK_FALSE(o.logical_error);
        CHECK(o.defect_count == 0);
    }
}

TEST_CASE("sweep finds an interior optimum for a U-shaped configuration") {
    // decreasing measurement error, increasing idle error
    std::vector<double> ts{1.0, 2.0, 4.0, 8.0, 16.0};
    std::vector<double> ps{0.25, 0.12, 0.03, 0.008, 0.002};
    NoiseCurves curves(ts, ps, CoherenceParams{0.06, 0.08});
    RepCodeConfig cfg;
    cfg.distance = 5;
    cfg.rounds = 10;
    cfg.shots = 3000;
    cfg.seed = 5;
    const auto sweep = ler_repetition_sweep(ts, curves, cfg, TimingParams{});
    REQUIRE(sweep.size() == ts.size());
    const double best = find_optimal_duration(sweep);
    CHECK(best > ts.front());
    CHECK(best < ts.back());
}

TEST_CASE("optimal duration tie-breaks toward the shorter duration") {
    std::vector<LerPoint> flat(3);
    flat[0] = {2.0, 0, 0, 0.1, 0.01, 100};
    flat[1] = {1.0, 0, 0, 0.1, 0.01, 100};
    flat[2] = {4.0, 0, 0, 0.1, 0.01, 100};
    CHECK(find_optimal_duration(flat) == 1.0);

    flat[2].ler = 0.05;
    CHECK(find_optimal_duration(flat) == 4.0);
}

TEST_CASE("ler sweep is invariant to parallelism and rejects bad probabilities") {
    std::vector<double> ts{2.0, 4.0};
    NoiseCurves curves(ts, {0.1, 0.05}, CoherenceParams{0.1, 0.12});
    RepCodeConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 5;
    cfg.shots = 2000;

    atomread::set_parallel(true);
    const auto a = ler_repetition_sweep(ts, curves, cfg, TimingParams{});
    atomread::set_parallel(false);
    const auto b = ler_repetition_sweep(ts, curves, cfg, TimingParams{});
    atomread::set_parallel(true);
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].ler == b[i].ler);

    CHECK_THROWS(simulate_repetition_shot(3, 5, 1.5, 0.0, 1));
    CHECK_THROWS(simulate_repetition_shot(4, 5, 0.1, 0.0, 1));  // even distance
}
