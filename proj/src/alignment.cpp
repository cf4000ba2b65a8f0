#include "cpspan/alignment.hpp"

#include <stdexcept>

#include "cpspan/errors.hpp"

namespace cpspan {

Matrix cosine_similarity(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw std::invalid_argument("cosine_similarity: dimension mismatch");
    std::vector<double> norm_a(a.rows()), norm_b(b.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        norm_a[r] = row_norm(a, r);
        if (norm_a[r] < 1e-12) throw DegenerateEmbedding(r);
    }
    for (std::size_t r = 0; r < b.rows(); ++r) {
        norm_b[r] = row_norm(b, r);
        if (norm_b[r] < 1e-12) throw DegenerateEmbedding(r);
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t p = 0; p < a.rows(); ++p)
        for (std::size_t q = 0; q < b.rows(); ++q)
            out(p, q) = row_dot(a, p, b, q) / (norm_a[p] * norm_b[q]);
    return out;
}

double partial_sample_alignment_loss(const std::vector<Matrix>& view_embeddings,
                                     const std::vector<PairObservedIndex>& pairs) {
    double total = 0.0;
    for (const PairObservedIndex& pair : pairs) {
        if (pair.rows.empty()) continue;
        const Matrix& hi = view_embeddings.at(pair.view_i);
        const Matrix& hj = view_embeddings.at(pair.view_j);
        Matrix a(pair.count(), hi.cols());
        Matrix b(pair.count(), hj.cols());
        for (std::size_t p = 0; p < pair.rows.size(); ++p) {
            for (std::size_t c = 0; c < hi.cols(); ++c) a(p, c) = hi(pair.rows[p], c);
            for (std::size_t c = 0; c < hj.cols(); ++c) b(p, c) = hj(pair.rows[p], c);
        }
        const Matrix s = cosine_similarity(a, b);
        double acc = 0.0;
        for (std::size_t p = 0; p < s.rows(); ++p) {
            const double diff = s(p, p) - 1.0;
            acc += diff * diff;
        }
        total += acc / static_cast<double>(pair.count());
    }
    return total;
}

double contrastive_loss(const std::vector<Matrix>& view_embeddings, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("contrastive_loss: temperature must be positive");
    Tape tape;
    std::vector<Tape::Var> vars;
    vars.reserve(view_embeddings.size());
    for (const Matrix& h : view_embeddings) vars.push_back(tape.constant(h));
    return tape.value(tape.contrastive(vars, tau))(0, 0);
}

Tape::Var sample_alignment_term(Tape& tape, Tape::Var hi, Tape::Var hj) {
    const std::size_t count = tape.value(hi).rows();
    Tape::Var diag = tape.diagonal(tape.cosine_rows(hi, hj));
    Tape::Var diff = tape.sub(diag, tape.constant(Matrix(count, 1, 1.0)));
    return tape.scale(tape.sum_squares(diff), 1.0 / static_cast<double>(count));
}

}  // namespace cpspan
