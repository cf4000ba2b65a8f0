#pragma once

#include <cstdint>
#include <vector>

#include "cpspan/matrix.hpp"
#include "cpspan/tape.hpp"

namespace cpspan {

struct PrototypeSet {
    Matrix centers;                // K x d
    std::vector<int> assignments;  // one per input row, in [0, K)
    int view_id = 0;
    double inertia = 0.0;          // sum of squared distances to assigned centers
    int iterations = 0;
};

// Lloyd iterations from k-means++ seeding until the assignment reaches a fixed
// point (or 300 iterations). Empty clusters are repaired by reassigning the
// point farthest from its center, lowest index on ties.
PrototypeSet kmeans(const Matrix& points, int k, std::uint64_t seed);

// Lloyd from the given centers; used to keep cluster identities stable when
// prototypes are refreshed between epochs.
PrototypeSet lloyd_from(const Matrix& points, Matrix centers);

// Squared Euclidean distances between rows of a and rows of b.
Matrix cost_matrix(const Matrix& a, const Matrix& b);

struct AssignmentResult {
    std::vector<std::size_t> row_to_col;
    double cost = 0.0;
    Matrix permutation;  // K x K binary
};

// Exact minimum-cost assignment (Jonker-Volgenant style shortest augmenting
// paths, O(n^3)). Throws on non-finite entries.
AssignmentResult hungarian(const Matrix& cost);

// Nearest permutation to a relaxed matrix, by maximum total overlap.
Matrix round_to_permutation(const Matrix& relaxed);

// One pass of the three constraint projections: row sums to one, column sums
// to one, then clipping negatives. Permutation matrices are exact fixed points.
Matrix project_cycle(Matrix p);

// Repeated cycles with early stop once the residual falls below tol.
Matrix project_to_constraints(Matrix p, int max_cycles = 20, double tol = 1e-4);

// max(negativity, |row sums - 1|, |column sums - 1|)
double constraint_residual(const Matrix& p);

struct AlignmentState {
    Matrix relaxed;  // learnable surrogate, kept near the doubly stochastic set
    Matrix hard;     // permutation rounding
    std::size_t view_i = 0;
    std::size_t view_j = 0;
};

// Sum over pairs of |C_i - P C_j|_F^2 / K, with P the relaxed matrix.
double prototype_alignment_loss(const std::vector<Matrix>& centers_per_view,
                                const std::vector<AlignmentState>& states);

// Initial states for every view pair (i < j): relaxed and hard both start at
// the exact assignment between the two prototype sets.
std::vector<AlignmentState> align_prototypes(const std::vector<Matrix>& centers_per_view);

// Tape builder for one pair's term: |C_i - P C_j|_F^2 / K.
Tape::Var prototype_alignment_term(Tape& tape, Tape::Var ci, Tape::Var cj, Tape::Var p);

}  // namespace cpspan
