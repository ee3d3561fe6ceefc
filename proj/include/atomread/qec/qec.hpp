#ifndef ATOMREAD_QEC_QEC_HPP
#define ATOMREAD_QEC_QEC_HPP

#include <cstdint>
#include <optional>
#include <vector>

namespace atomread::qec {

// All latency symbols of the cycle-time and pipelining models, in seconds.
struct TimingParams {
    double t_gate = 5e-6;
    double t_readout = 1.5e-3;
    double t_classification = 4e-4;
    double t_denoise = 1.6e-3;
    double t_reset = 0.0;
    long long d_rounds = 100;
    long long n_tgates = 1;
};

struct CoherenceParams {
    double t1 = 0.15;  // seconds
    double t2 = 0.2;
};

struct PauliProbs {
    double px = 0, py = 0, pz = 0;
    double total() const { return px + py + pz; }
};

double qec_cycle_time(const TimingParams& t);
double exec_time_estimate(const TimingParams& t);

// Unpipelined: classification is paid every round. Pipelined: classification
// of round k overlaps acquisition of round k+1, so denoise+classify is paid
// once after the final round. Reset is folded into t_gate here; see
// qec_cycle_time for the cycle model that carries it explicitly.
double t_unpipelined(const TimingParams& t);
double t_pipelined(const TimingParams& t);
// Closed form: t_unpipelined - t_pipelined.
double pipeline_gap(const TimingParams& t);

// Stochastic Pauli channel equivalent of T1/T2 idling for the given duration.
// Throws if t2 > 2*t1 (channel not completely positive).
PauliProbs pauli_twirl_idle(double duration_s, const CoherenceParams& c);

// Measurement-error curve plus idling channel per readout duration.
// p_meas uses the measured points where available and the parametric fit
// a*exp(-b*t)+c elsewhere.
class NoiseCurves {
public:
    NoiseCurves(std::vector<double> durations_ms, std::vector<double> p_meas_points,
                CoherenceParams coherence, double idle_overhead_ms = 0.0);

    double p_meas(double duration_ms) const;
    PauliProbs idle_channel(double duration_ms) const;

    // Least-squares fit of a*exp(-b*t)+c over the measured points (grid search
    // on b, linear solve for a and c). Clamped to [0, 1].
    struct ExpFit {
        double a = 0, b = 0, c = 0;
        double eval(double t) const;
    };
    const ExpFit& fit() const { return fit_; }

private:
    std::vector<double> durations_ms_;
    std::vector<double> p_meas_points_;
    CoherenceParams coherence_;
    double idle_overhead_ms_ = 0.0;
    ExpFit fit_;
};

struct RepCodeConfig {
    int distance = 5;  // odd >= 3
    int rounds = 20;
    long long shots = 10000;
    uint64_t seed = 1;
    // Pairings are enumerated exactly up to this many defects; beyond it the
    // greedy nearest-defect decoder takes over.
    int max_bruteforce_defects = 12;
};

struct Defect {
    int check = 0;  // in [0, distance-2]
    int time = 0;   // in [0, rounds]; rounds is the closing perfect round
};

struct MatchResult {
    double weight = 0.0;
    // Parity of left-boundary matches == parity of the correction on data
    // qubit 0, which decides the logical outcome.
    int left_boundary_parity = 0;
    bool exact = true;
};

// Unit-weight shortest-path distance between defects on the spacetime graph.
// Space edges exist only at times < rounds (the closing round is perfect).
double defect_distance(const Defect& a, const Defect& b, int rounds);
double boundary_distance(const Defect& a, int distance, int rounds, bool left);

MatchResult match_defects_bruteforce(const std::vector<Defect>& defects,
                                     int distance, int rounds);
MatchResult match_defects_greedy(const std::vector<Defect>& defects,
                                 int distance, int rounds);
// Dispatches on the defect count per RepCodeConfig::max_bruteforce_defects.
MatchResult match_defects(const std::vector<Defect>& defects, int distance,
                          int rounds, int max_bruteforce_defects);

struct ShotOutcome {
    bool logical_error = false;
    int defect_count = 0;
    bool decoded_exactly = true;
};

// One phenomenological bit-flip shot: per round every data qubit flips with
// p_flip, every syndrome bit reads out wrong with p_meas; a perfect round
// closes the defect graph.
ShotOutcome simulate_repetition_shot(int distance, int rounds, double p_flip,
                                     double p_meas, uint64_t seed,
                                     int max_bruteforce_defects = 12);

struct LerPoint {
    double duration_ms = 0.0;
    double p_meas = 0.0;
    double p_flip = 0.0;
    double ler = 0.0;
    double std_error = 0.0;
    long long shots = 0;
};

// Monte Carlo LER per readout duration; shots run in parallel with per-shot
// derived seeds so results are invariant to thread count.
std::vector<LerPoint> ler_repetition_sweep(const std::vector<double>& durations_ms,
                                           const NoiseCurves& noise,
                                           const RepCodeConfig& config,
                                           const TimingParams& timing);

// Argmin of LER; ties break toward the shorter duration.
double find_optimal_duration(const std::vector<LerPoint>& sweep);

}  // namespace atomread::qec

#endif
