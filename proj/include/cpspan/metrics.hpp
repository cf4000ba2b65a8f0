#pragma once

#include <vector>

#include "cpspan/matrix.hpp"

namespace cpspan {

struct ClusteringResult {
    std::vector<int> predicted;
    std::vector<int> truth;
    double acc = 0.0;
    double nmi = 0.0;
    double fmeasure = 0.0;
    // cluster index -> matched class index, both sides relabeled to dense ids
    // in order of first appearance; -1 for padding clusters with no class
    std::vector<int> matching;
};

// Fraction of samples agreeing with the truth under the best cluster-to-class
// assignment.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth,
                std::vector<int>* matching = nullptr);

// Mutual information normalized by the geometric mean of the two label
// entropies (natural log). Two constant labelings score 1; one constant
// labeling against a non-constant one scores 0.
double nmi(const std::vector<int>& predicted, const std::vector<int>& truth);

// Pairwise F-measure over same-cluster sample pairs; 0 when either side has
// no same-cluster pair.
double fmeasure(const std::vector<int>& predicted, const std::vector<int>& truth);

ClusteringResult evaluate_clustering(const std::vector<int>& predicted,
                                     const std::vector<int>& truth);

}  // namespace cpspan
