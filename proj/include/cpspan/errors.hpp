#pragma once

#include <stdexcept>
#include <string>

namespace cpspan {

// CSV / file ingestion problem; carries the file and 1-based row it came from.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string file, std::size_t row, const std::string& what)
        : std::runtime_error(file + ", row " + std::to_string(row) + ": " + what),
          file_(std::move(file)),
          row_(row) {}

    const std::string& file() const { return file_; }
    std::size_t row() const { return row_; }

private:
    std::string file_;
    std::size_t row_;
};

// Non-finite gradient or parameter during optimization.
class TrainingDivergence : public std::runtime_error {
public:
    TrainingDivergence(std::string tensor, const std::string& what)
        : std::runtime_error("training diverged at tensor '" + tensor + "': " + what),
          tensor_(std::move(tensor)) {}

    const std::string& tensor() const { return tensor_; }

private:
    std::string tensor_;
};

// Cosine similarity requested for a row with (near) zero norm.
class DegenerateEmbedding : public std::runtime_error {
public:
    explicit DegenerateEmbedding(std::size_t row)
        : std::runtime_error("degenerate embedding: row " + std::to_string(row) +
                             " has near-zero norm, cosine similarity undefined"),
          row_(row) {}

    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

// A missing cell has no donor pool in any view the sample is observed in.
class ImputationInfeasible : public std::runtime_error {
public:
    ImputationInfeasible(std::size_t sample, std::size_t view)
        : std::runtime_error("imputation infeasible for sample " + std::to_string(sample) +
                             " in view " + std::to_string(view) + ": every donor pool is empty"),
          sample_(sample),
          view_(view) {}

    std::size_t sample() const { return sample_; }
    std::size_t view() const { return view_; }

private:
    std::size_t sample_;
    std::size_t view_;
};

}  // namespace cpspan
