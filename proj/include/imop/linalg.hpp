#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace imop {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Bad input: dimensions, out-of-box parameters, malformed configs.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A solver failed to produce a usable answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

/// Stack rows of two matrices with equal column count.
inline Mat vstack(const Mat& a, const Mat& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    Mat out(a.rows() + b.rows(), a.cols());
    out << a, b;
    return out;
}

inline Vec vcat(const Vec& a, const Vec& b) {
    Vec out(a.size() + b.size());
    out << a, b;
    return out;
}

inline Vec to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline Mat rows_to_mat(const std::vector<std::vector<double>>& rows, Eigen::Index cols = -1) {
    Eigen::Index n = rows.empty() ? (cols < 0 ? 0 : cols) : static_cast<Eigen::Index>(rows[0].size());
    Mat m(static_cast<Eigen::Index>(rows.size()), n);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(static_cast<Eigen::Index>(rows[i].size()) == n, "ragged matrix rows");
        for (Eigen::Index j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
    return m;
}

inline double sq(double v) { return v * v; }

/// Orthonormal basis of the null space of `a` (columns). Identity when `a` has no rows.
inline Mat null_space(const Mat& a, Eigen::Index n) {
    if (a.rows() == 0) return Mat::Identity(n, n);
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    double tol = 1e-10 * std::max(1.0, s.size() ? s(0) : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > tol) ++rank;
    return svd.matrixV().rightCols(n - rank);
}

}  // namespace imop
