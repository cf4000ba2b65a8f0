#include "cpspan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "cpspan/prototype.hpp"

namespace cpspan {

namespace {

std::vector<int> densify(const std::vector<int>& labels, std::size_t& distinct) {
    std::map<int, int> ids;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = ids.emplace(labels[i], static_cast<int>(ids.size()));
        out[i] = it->second;
        (void)inserted;
    }
    distinct = ids.size();
    return out;
}

// counts[i][j] = |{s : pred[s] = i, truth[s] = j}| over dense ids
Matrix contingency(const std::vector<int>& pred, const std::vector<int>& truth,
                   std::size_t& np, std::size_t& nt) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("clustering metrics: label vectors differ in length");
    if (pred.empty()) throw std::invalid_argument("clustering metrics: empty labelings");
    const std::vector<int> p = densify(pred, np);
    const std::vector<int> t = densify(truth, nt);
    Matrix counts(np, nt);
    for (std::size_t s = 0; s < p.size(); ++s) counts(p[s], t[s]) += 1.0;
    return counts;
}

}  // namespace

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth,
                std::vector<int>* matching) {
    std::size_t np = 0, nt = 0;
    const Matrix counts = contingency(predicted, truth, np, nt);

    const std::size_t n = std::max(np, nt);
    Matrix cost(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            cost(i, j) = (i < np && j < nt) ? -counts(i, j) : 0.0;

    const AssignmentResult assignment = hungarian(cost);
    double matched = 0.0;
    for (std::size_t i = 0; i < np; ++i)
        if (assignment.row_to_col[i] < nt) matched += counts(i, assignment.row_to_col[i]);

    if (matching) {
        matching->assign(np, -1);
        for (std::size_t i = 0; i < np; ++i)
            if (assignment.row_to_col[i] < nt)
                (*matching)[i] = static_cast<int>(assignment.row_to_col[i]);
    }
    return matched / static_cast<double>(predicted.size());
}

double nmi(const std::vector<int>& predicted, const std::vector<int>& truth) {
    std::size_t np = 0, nt = 0;
    const Matrix counts = contingency(predicted, truth, np, nt);
    const double n = static_cast<double>(predicted.size());

    std::vector<double> row_sum(np, 0.0), col_sum(nt, 0.0);
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < nt; ++j) {
            row_sum[i] += counts(i, j);
            col_sum[j] += counts(i, j);
        }

    double h_pred = 0.0, h_truth = 0.0;
    for (double r : row_sum)
        if (r > 0.0) h_pred -= (r / n) * std::log(r / n);
    for (double c : col_sum)
        if (c > 0.0) h_truth -= (c / n) * std::log(c / n);

    if (h_pred <= 0.0 && h_truth <= 0.0) return 1.0;  // both constant: same partition
    if (h_pred <= 0.0 || h_truth <= 0.0) return 0.0;

    double mi = 0.0;
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < nt; ++j) {
            const double c = counts(i, j);
            if (c > 0.0) mi += (c / n) * std::log(c * n / (row_sum[i] * col_sum[j]));
        }
    return std::clamp(mi / std::sqrt(h_pred * h_truth), 0.0, 1.0);
}

double fmeasure(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("clustering metrics: label vectors differ in length");
    if (predicted.size() < 2) throw std::invalid_argument("fmeasure: need at least two samples");
    std::size_t np = 0, nt = 0;
    const Matrix counts = contingency(predicted, truth, np, nt);

    auto pairs = [](double c) { return c * (c - 1.0) / 2.0; };
    double tp = 0.0, predicted_pairs = 0.0, truth_pairs = 0.0;
    std::vector<double> row_sum(np, 0.0), col_sum(nt, 0.0);
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < nt; ++j) {
            tp += pairs(counts(i, j));
            row_sum[i] += counts(i, j);
            col_sum[j] += counts(i, j);
        }
    for (double r : row_sum) predicted_pairs += pairs(r);
    for (double c : col_sum) truth_pairs += pairs(c);

    const double precision = predicted_pairs > 0.0 ? tp / predicted_pairs : 0.0;
    const double recall = truth_pairs > 0.0 ? tp / truth_pairs : 0.0;
    if (precision + recall <= 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

ClusteringResult evaluate_clustering(const std::vector<int>& predicted,
                                     const std::vector<int>& truth) {
    ClusteringResult result;
    result.predicted = predicted;
    result.truth = truth;
    result.acc = accuracy(predicted, truth, &result.matching);
    result.nmi = nmi(predicted, truth);
    result.fmeasure = fmeasure(predicted, truth);
    return result;
}

}  // namespace cpspan
