#ifndef ATOMREAD_TESTS_REP_CODE_ORACLE_HPP
#define ATOMREAD_TESTS_REP_CODE_ORACLE_HPP

// Exhaustive-correction oracle for the repetition-code decoder tests: BFS
// over (defect set, logical parity) states on the spacetime graph. Kept
// independent of the matching decoder it validates.

#include <cstdint>
#include <utility>
#include <vector>

namespace atomread::test_support {

struct RepCodeOracle {
    int distance, rounds;
    int checks, levels, bits;

    RepCodeOracle(int d, int r)
        : distance(d), rounds(r), checks(d - 1), levels(r + 1), bits(checks * levels) {}

    int defect_bit(int check, int t) const { return check * levels + t; }

    // Minimum error weight reaching the given defect mask, split by the
    // logical parity of the explaining error set.
    std::pair<int, int> min_weights(uint32_t target_mask) const {
        const uint32_t nstates = 1u << (bits + 1);
        std::vector<int> dist(nstates, INT32_MAX);
        std::vector<uint32_t> frontier{0};
        dist[0] = 0;
        while (!frontier.empty()) {
            std::vector<uint32_t> next;
            for (uint32_t s : frontier) {
                const int d0 = dist[s];
                auto relax = [&](uint32_t ns) {
                    if (dist[ns] > d0 + 1) {
                        dist[ns] = d0 + 1;
                        next.push_back(ns);
                    }
                };
                // data-flip edges exist at every level with space edges
                for (int t = 0; t < rounds; ++t)
                    for (int j = 0; j < distance; ++j) {
                        uint32_t mask = s;
                        if (j - 1 >= 0)
                            mask ^= 1u << (defect_bit(j - 1, t) + 1);
                        if (j <= checks - 1)
                            mask ^= 1u << (defect_bit(j, t) + 1);
                        if (j == 0)
                            mask ^= 1u;  // logical parity bit
                        relax(mask);
                    }
                // measurement edges between consecutive syndrome levels
                for (int t = 0; t < rounds; ++t)
                    for (int i = 0; i < checks; ++i) {
                        uint32_t mask = s;
                        mask ^= 1u << (defect_bit(i, t) + 1);
                        mask ^= 1u << (defect_bit(i, t + 1) + 1);
                        relax(mask);
                    }
            }
            frontier = std::move(next);
        }
        const uint32_t even = target_mask << 1;
        const uint32_t odd = even | 1u;
        return {dist[even], dist[odd]};
    }
};

}  // namespace atomread::test_support

#endif
