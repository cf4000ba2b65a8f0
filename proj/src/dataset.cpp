#include "cpspan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cpspan/errors.hpp"
#include "cpspan/rng.hpp"

namespace cpspan {

std::vector<std::size_t> MultiViewDataset::observed_rows(std::size_t view) const {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < sample_count(); ++r)
        if (observed(r, view)) rows.push_back(r);
    return rows;
}

std::size_t MultiViewDataset::observed_count(std::size_t view) const {
    std::size_t n = 0;
    for (std::size_t r = 0; r < sample_count(); ++r)
        if (observed(r, view)) ++n;
    return n;
}

void MultiViewDataset::fill_unobserved(double sentinel) {
    for (std::size_t v = 0; v < view_count(); ++v)
        for (std::size_t r = 0; r < sample_count(); ++r)
            if (!observed(r, v))
                for (std::size_t c = 0; c < views[v].cols(); ++c) views[v](r, c) = sentinel;
}

void validate(const MultiViewDataset& ds) {
    if (ds.views.empty()) throw std::invalid_argument("dataset has no views");
    const std::size_t n = ds.views.front().rows();
    for (std::size_t v = 0; v < ds.views.size(); ++v)
        if (ds.views[v].rows() != n)
            throw std::invalid_argument("view " + std::to_string(v) +
                                        " row count differs from view 0");
    if (ds.mask.rows() != n || ds.mask.cols() != ds.views.size())
        throw std::invalid_argument("mask shape does not match dataset");
    for (std::size_t r = 0; r < n; ++r) {
        bool any = false;
        for (std::size_t v = 0; v < ds.views.size(); ++v) {
            const double m = ds.mask(r, v);
            if (m != 0.0 && m != 1.0)
                throw std::invalid_argument("mask entry is not binary at row " +
                                            std::to_string(r + 1));
            any = any || m == 1.0;
        }
        if (!any)
            throw std::invalid_argument("sample " + std::to_string(r) +
                                        " is observed in no view");
    }
    if (!ds.labels.empty() && ds.labels.size() != n)
        throw std::invalid_argument("label count does not match sample count");
}

Matrix generate_mask(std::size_t n, std::size_t v, const MaskSpec& spec) {
    if (n < 1) throw std::invalid_argument("generate_mask: need at least one sample");
    if (v < 2) throw std::invalid_argument("generate_mask: need at least two views");
    if (!(spec.missing_rate >= 0.0) ||
        spec.missing_rate >= static_cast<double>(v - 1) / static_cast<double>(v))
        throw std::invalid_argument(
            "generate_mask: missing rate must lie in [0, (v-1)/v) to keep every "
            "sample observed in at least one view");

    Matrix mask(n, v, 1.0);
    const auto total = static_cast<double>(n) * static_cast<double>(v);
    auto quota = static_cast<std::size_t>(std::llround(spec.missing_rate * total));
    if (quota == 0) return mask;

    std::vector<std::size_t> cells(n * v);
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    auto engine = make_engine(spec.seed, rng_salt::mask, n, v);
    std::shuffle(cells.begin(), cells.end(), engine);

    std::vector<std::size_t> missing_per_row(n, 0);
    for (std::size_t cell : cells) {
        const std::size_t row = cell / v;
        if (missing_per_row[row] + 1 >= v) continue;  // keep one view observed
        mask(row, cell % v) = 0.0;
        ++missing_per_row[row];
        if (--quota == 0) break;
    }
    return mask;
}

PairObservedIndex pair_observed(const MultiViewDataset& ds, std::size_t view_i,
                                std::size_t view_j) {
    if (view_i == view_j) throw std::invalid_argument("pair_observed: views must differ");
    if (view_i >= ds.view_count() || view_j >= ds.view_count())
        throw std::invalid_argument("pair_observed: view id out of range");
    PairObservedIndex out;
    out.view_i = view_i;
    out.view_j = view_j;
    for (std::size_t r = 0; r < ds.sample_count(); ++r)
        if (ds.observed(r, view_i) && ds.observed(r, view_j)) out.rows.push_back(r);
    return out;
}

std::vector<PairObservedIndex> all_pairs(const MultiViewDataset& ds) {
    std::vector<PairObservedIndex> pairs;
    for (std::size_t i = 0; i < ds.view_count(); ++i)
        for (std::size_t j = i + 1; j < ds.view_count(); ++j)
            pairs.push_back(pair_observed(ds, i, j));
    return pairs;
}

std::vector<std::size_t> resample_complete(const MultiViewDataset& ds, std::size_t view,
                                           std::uint64_t seed) {
    if (view >= ds.view_count()) throw std::invalid_argument("resample_complete: bad view id");
    const auto observed = ds.observed_rows(view);
    if (observed.empty())
        throw std::invalid_argument("resample_complete: view " + std::to_string(view) +
                                    " has no observed rows");
    auto engine = make_engine(seed, rng_salt::resample, view);
    std::uniform_int_distribution<std::size_t> pick(0, observed.size() - 1);
    std::vector<std::size_t> index(ds.sample_count());
    for (std::size_t r = 0; r < ds.sample_count(); ++r)
        index[r] = ds.observed(r, view) ? r : observed[pick(engine)];
    return index;
}

namespace {

std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t end = line.find(',', start);
            if (end == std::string::npos) end = line.size();
            const std::string tok = line.substr(start, end - start);
            char* tail = nullptr;
            const double value = std::strtod(tok.c_str(), &tail);
            if (tok.empty() || tail != tok.c_str() + tok.size())
                throw ParseError(path.string(), lineno, "cannot parse value '" + tok + "'");
            row.push_back(value);
            if (end == line.size()) break;
            start = end + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError(path.string(), lineno,
                             "row has " + std::to_string(row.size()) + " columns, expected " +
                                 std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path.string(), 0, "file holds no data rows");
    return rows;
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return m;
}

void write_row(std::FILE* f, const double* p, std::size_t n) {
    for (std::size_t c = 0; c < n; ++c)
        std::fprintf(f, c + 1 < n ? "%.17g," : "%.17g\n", p[c]);
}

}  // namespace

Matrix read_csv_matrix(const std::filesystem::path& path) {
    return rows_to_matrix(read_csv_rows(path));
}

void write_csv_matrix(const Matrix& m, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t r = 0; r < m.rows(); ++r) write_row(f, m.row(r), m.cols());
    std::fclose(f);
}

MultiViewDataset load_csv(const std::vector<std::filesystem::path>& view_paths,
                          const std::filesystem::path& mask_path,
                          const std::optional<std::filesystem::path>& labels_path) {
    if (view_paths.empty()) throw std::invalid_argument("load_csv: no view files given");

    MultiViewDataset ds;
    for (const auto& path : view_paths) ds.views.push_back(read_csv_matrix(path));

    const std::size_t n = ds.views.front().rows();
    for (std::size_t v = 1; v < ds.views.size(); ++v)
        if (ds.views[v].rows() != n)
            throw ParseError(view_paths[v].string(), ds.views[v].rows(),
                             "view has " + std::to_string(ds.views[v].rows()) +
                                 " rows, expected " + std::to_string(n));

    const auto mask_rows = read_csv_rows(mask_path);
    if (mask_rows.size() != n)
        throw ParseError(mask_path.string(), mask_rows.size(),
                         "mask has " + std::to_string(mask_rows.size()) + " rows, views have " +
                             std::to_string(n));
    if (mask_rows.front().size() != ds.views.size())
        throw ParseError(mask_path.string(), 1,
                         "mask has " + std::to_string(mask_rows.front().size()) +
                             " columns, expected one per view (" +
                             std::to_string(ds.views.size()) + ")");
    ds.mask = Matrix(n, ds.views.size());
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t v = 0; v < ds.views.size(); ++v) {
            const double m = mask_rows[r][v];
            if (m != 0.0 && m != 1.0)
                throw ParseError(mask_path.string(), r + 1,
                                 "mask entry must be 0 or 1, found " + std::to_string(m));
            ds.mask(r, v) = m;
        }

    if (labels_path) {
        const auto label_rows = read_csv_rows(*labels_path);
        if (label_rows.size() != n)
            throw ParseError(labels_path->string(), label_rows.size(),
                             "label count does not match sample count");
        std::set<int> distinct;
        for (std::size_t r = 0; r < n; ++r) {
            const double value = label_rows[r].front();
            const int label = static_cast<int>(std::llround(value));
            if (label_rows[r].size() != 1 || value != label)
                throw ParseError(labels_path->string(), r + 1, "labels must be one integer per line");
            ds.labels.push_back(label);
            distinct.insert(label);
        }
        ds.k = static_cast<int>(distinct.size());
    }

    validate(ds);
    return ds;
}

void save_csv(const MultiViewDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t v = 0; v < ds.view_count(); ++v)
        write_csv_matrix(ds.views[v], dir / ("view_" + std::to_string(v) + ".csv"));
    write_csv_matrix(ds.mask, dir / "mask.csv");
    if (!ds.labels.empty()) {
        std::ofstream out(dir / "labels.csv");
        if (!out) throw std::runtime_error("cannot write labels.csv under " + dir.string());
        for (int label : ds.labels) out << label << '\n';
    }
}

MultiViewDataset synth_gaussian(std::size_t n, std::size_t v, int k,
                                const std::vector<std::size_t>& dims, double separation,
                                std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("synth_gaussian: need k >= 2");
    if (n < static_cast<std::size_t>(k)) throw std::invalid_argument("synth_gaussian: need n >= k");
    if (dims.size() != v) throw std::invalid_argument("synth_gaussian: dims must have one entry per view");
    for (std::size_t d : dims)
        if (d < 2) throw std::invalid_argument("synth_gaussian: every view dim must be >= 2");

    MultiViewDataset ds;
    ds.k = k;
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(i % k);

    auto engine = make_engine(seed, rng_salt::synth, n, v);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // One mean per (view, cluster) on a sphere of radius `separation`.
    std::vector<Matrix> means;
    for (std::size_t view = 0; view < v; ++view) {
        Matrix m(k, dims[view]);
        for (int c = 0; c < k; ++c) {
            double norm = 0.0;
            do {
                norm = 0.0;
                for (std::size_t j = 0; j < dims[view]; ++j) {
                    m(c, j) = gauss(engine);
                    norm += m(c, j) * m(c, j);
                }
                norm = std::sqrt(norm);
            } while (norm < 1e-12);
            for (std::size_t j = 0; j < dims[view]; ++j) m(c, j) *= separation / norm;
        }
        means.push_back(std::move(m));
    }

    for (std::size_t view = 0; view < v; ++view) {
        Matrix x(n, dims[view]);
        for (std::size_t i = 0; i < n; ++i) {
            const int c = ds.labels[i];
            for (std::size_t j = 0; j < dims[view]; ++j)
                x(i, j) = means[view](c, j) + gauss(engine);
        }
        ds.views.push_back(std::move(x));
    }

    ds.mask = Matrix(n, v, 1.0);
    validate(ds);
    return ds;
}

MultiViewDataset apply_mask(const MultiViewDataset& ds, Matrix mask, double sentinel) {
    MultiViewDataset out = ds;
    out.mask = std::move(mask);
    validate(out);
    out.fill_unobserved(sentinel);
    return out;
}

}  // namespace cpspan
