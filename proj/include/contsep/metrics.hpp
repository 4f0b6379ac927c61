#pragma once

#include <cstdint>
#include <vector>

namespace contsep::metrics {

// Projection-based decomposition of an estimate into target, interference and
// artifact parts. s_target is the least-squares projection of the estimate
// onto the target reference and its delays (filter_len taps); e_interf adds
// the span of all references; e_artif is the remainder. The three parts sum
// to the estimate exactly.
struct BssDecomposition {
    std::vector<double> s_target;
    std::vector<double> e_interf;
    std::vector<double> e_artif;
    int filter_len = 0;
    bool target_degenerate = false;  // zero projected-target energy
};

BssDecomposition bss_decompose(const std::vector<double>& estimate,
                               const std::vector<std::vector<double>>& references,
                               std::size_t target_idx, int filter_len);

// dB ratios capped at +/-100 so downstream aggregation stays finite.
double sdr_db(const BssDecomposition& d);
double sir_db(const BssDecomposition& d);
double sar_db(const BssDecomposition& d);

struct BssScores {
    double sdr = 0.0;
    double sir = 0.0;
    double sar = 0.0;
};

BssScores evaluate_estimate(const std::vector<double>& estimate,
                            const std::vector<std::vector<double>>& references,
                            std::size_t target_idx, int filter_len);

}  // namespace contsep::metrics
