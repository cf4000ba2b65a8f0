#include "cpspan/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cpspan/errors.hpp"

namespace cpspan {

namespace {

double clamped_cosine(const Matrix& m, std::size_t r1, std::size_t r2) {
    const double n1 = std::max(row_norm(m, r1), 1e-12);
    const double n2 = std::max(row_norm(m, r2), 1e-12);
    return row_dot(m, r1, m, r2) / (n1 * n2);
}

}  // namespace

EmbeddingSet impute(EmbeddingSet emb, const std::vector<PairObservedIndex>& pairs, int rank) {
    if (rank < 1) throw std::invalid_argument("impute: rank must be >= 1");
    const std::size_t n = emb.sample_count();
    const std::size_t v = emb.view_count();

    // pool[a][b]: rows observed in both a and b (the donors available when
    // filling view a from view b)
    std::vector<std::vector<const std::vector<std::size_t>*>> pool(
        v, std::vector<const std::vector<std::size_t>*>(v, nullptr));
    for (const PairObservedIndex& pair : pairs) {
        pool[pair.view_i][pair.view_j] = &pair.rows;
        pool[pair.view_j][pair.view_i] = &pair.rows;
    }

    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t a = 0; a < v; ++a) {
            if (emb.at(s, a) != Provenance::Absent) continue;

            // donor view: largest pool among views where s is observed
            std::size_t donor_view = v;
            std::size_t best_pool = 0;
            bool observed_anywhere = false;
            for (std::size_t b = 0; b < v; ++b) {
                if (b == a || emb.at(s, b) != Provenance::Observed) continue;
                observed_anywhere = true;
                const auto* rows = pool[a][b];
                if (rows && rows->size() > best_pool) {
                    best_pool = rows->size();
                    donor_view = b;
                }
            }
            if (!observed_anywhere)
                throw std::logic_error("impute: sample " + std::to_string(s) +
                                       " observed in no view");
            if (donor_view == v) throw ImputationInfeasible(s, a);

            const std::vector<std::size_t>& candidates = *pool[a][donor_view];
            std::vector<std::pair<double, std::size_t>> scored;
            scored.reserve(candidates.size());
            for (std::size_t t : candidates)
                scored.emplace_back(clamped_cosine(emb.views[donor_view], s, t), t);
            std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
                if (x.first != y.first) return x.first > y.first;
                return x.second < y.second;
            });

            const int used_rank = std::min<int>(rank, static_cast<int>(scored.size()));
            const std::size_t donor_row = scored[used_rank - 1].second;
            for (std::size_t c = 0; c < emb.views[a].cols(); ++c)
                emb.views[a](s, c) = emb.views[a](donor_row, c);
            emb.at(s, a) = Provenance::Imputed;
            emb.neighbor_log.push_back({s, a, donor_view, donor_row, rank, used_rank});
        }
    }
    return emb;
}

Matrix fuse(const EmbeddingSet& emb) {
    if (emb.views.empty()) throw std::invalid_argument("fuse: empty embedding set");
    const std::size_t n = emb.sample_count();
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t a = 0; a < emb.view_count(); ++a)
            if (emb.at(s, a) == Provenance::Absent)
                throw std::invalid_argument("fuse: absent cell at sample " + std::to_string(s) +
                                            ", view " + std::to_string(a));

    std::size_t total = 0;
    for (const Matrix& m : emb.views) total += m.cols();
    Matrix fused(n, total);
    std::size_t offset = 0;
    for (const Matrix& m : emb.views) {
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < m.cols(); ++c) fused(r, offset + c) = m(r, c);
        offset += m.cols();
    }
    return fused;
}

}  // namespace cpspan
