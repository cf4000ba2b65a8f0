#include "cpspan/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace cpspan {

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "matmul: inner dimensions do not match");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "matmul_nt: inner dimensions do not match");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "matmul_tn: inner dimensions do not match");
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* orow = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    require(a.same_shape(b), "matrix add: shape mismatch");
    Matrix out = a;
    add_in_place(out, b);
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    require(a.same_shape(b), "matrix sub: shape mismatch");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

Matrix operator*(const Matrix& a, double s) {
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s;
    return out;
}

void add_in_place(Matrix& a, const Matrix& b) {
    require(a.same_shape(b), "matrix add: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

void add_scaled_in_place(Matrix& a, const Matrix& b, double s) {
    require(a.same_shape(b), "matrix add: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += s * b.data()[i];
}

double squared_norm(const Matrix& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.data()[i] * a.data()[i];
    return acc;
}

double row_norm(const Matrix& a, std::size_t r) {
    double acc = 0.0;
    const double* p = a.row(r);
    for (std::size_t j = 0; j < a.cols(); ++j) acc += p[j] * p[j];
    return std::sqrt(acc);
}

double row_dot(const Matrix& a, std::size_t ra, const Matrix& b, std::size_t rb) {
    double acc = 0.0;
    const double* pa = a.row(ra);
    const double* pb = b.row(rb);
    for (std::size_t j = 0; j < a.cols(); ++j) acc += pa[j] * pb[j];
    return acc;
}

double squared_row_distance(const Matrix& a, std::size_t ra, const Matrix& b, std::size_t rb) {
    double acc = 0.0;
    const double* pa = a.row(ra);
    const double* pb = b.row(rb);
    for (std::size_t j = 0; j < a.cols(); ++j) {
        const double diff = pa[j] - pb[j];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace cpspan
