#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qleak {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kEigenvalueClampTol = 1e-10;

namespace detail {

inline std::size_t log2_exact(std::size_t dim) {
    std::size_t m = 0;
    while ((std::size_t{1} << m) < dim) ++m;
    if ((std::size_t{1} << m) != dim)
        throw std::invalid_argument("dimension is not a power of two");
    return m;
}

}  // namespace detail

/// A word over {I, X, Y, Z}; register position 0 is the leftmost letter.
class PauliString {
public:
    explicit PauliString(std::string letters) : letters_(std::move(letters)) {
        if (letters_.empty())
            throw std::invalid_argument("empty Pauli string");
        for (char c : letters_)
            if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z')
                throw std::invalid_argument("invalid Pauli letter: " + std::string(1, c));
    }

    std::size_t size() const { return letters_.size(); }
    char at(std::size_t r) const { return letters_.at(r); }
    const std::string& str() const { return letters_; }

    bool has_identity() const { return letters_.find('I') != std::string::npos; }
    bool identity_free() const { return !has_identity(); }

    /// Number of non-identity letters.
    std::size_t weight() const {
        std::size_t w = 0;
        for (char c : letters_) w += (c != 'I');
        return w;
    }

    bool operator==(const PauliString& o) const { return letters_ == o.letters_; }
    bool operator<(const PauliString& o) const { return letters_ < o.letters_; }

    /// All 4^m strings over {I,X,Y,Z}, lexicographic in the digit order I<X<Y<Z.
    static std::vector<PauliString> all(std::size_t m) {
        static constexpr char kLetters[] = {'I', 'X', 'Y', 'Z'};
        std::size_t total = 1;
        for (std::size_t r = 0; r < m; ++r) total *= 4;
        std::vector<PauliString> out;
        out.reserve(total);
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::string s(m, 'I');
            std::size_t v = idx;
            for (std::size_t r = m; r-- > 0;) {
                s[r] = kLetters[v % 4];
                v /= 4;
            }
            out.emplace_back(std::move(s));
        }
        return out;
    }

    /// All 3^m identity-free strings over {X,Y,Z}.
    static std::vector<PauliString> all_identity_free(std::size_t m) {
        static constexpr char kLetters[] = {'X', 'Y', 'Z'};
        std::size_t total = 1;
        for (std::size_t r = 0; r < m; ++r) total *= 3;
        std::vector<PauliString> out;
        out.reserve(total);
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::string s(m, 'X');
            std::size_t v = idx;
            for (std::size_t r = m; r-- > 0;) {
                s[r] = kLetters[v % 3];
                v /= 3;
            }
            out.emplace_back(std::move(s));
        }
        return out;
    }

private:
    std::string letters_;
};

namespace detail {

// P|j> = phase * |f>, for the computational basis state j.
// Register position r occupies bit (m-1-r) of the index.
inline void pauli_action(const PauliString& p, std::size_t j, std::size_t& f, Complex& phase) {
    const std::size_t m = p.size();
    f = j;
    phase = Complex(1.0, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t shift = m - 1 - r;
        const int bit = static_cast<int>((j >> shift) & 1u);
        switch (p.at(r)) {
            case 'I':
                break;
            case 'X':
                f ^= (std::size_t{1} << shift);
                break;
            case 'Y':
                f ^= (std::size_t{1} << shift);
                phase *= (bit == 0) ? Complex(0.0, 1.0) : Complex(0.0, -1.0);
                break;
            case 'Z':
                if (bit == 1) phase = -phase;
                break;
        }
    }
}

}  // namespace detail

/// Unit-norm pure state on an M-qubit register.
class Statevector {
public:
    explicit Statevector(CVector amplitudes) : amps_(std::move(amplitudes)) {
        num_qubits_ = detail::log2_exact(static_cast<std::size_t>(amps_.size()));
        const double norm = amps_.norm();
        if (std::abs(norm - 1.0) > kHermitianTol)
            throw std::invalid_argument("statevector is not unit norm");
    }

    /// Computational basis state from a bitstring ("010" -> |010>).
    static Statevector basis_state(const std::string& bits) {
        const std::size_t m = bits.size();
        std::size_t idx = 0;
        for (std::size_t r = 0; r < m; ++r) {
            char c = bits[r];
            if (c != '0' && c != '1')
                throw std::invalid_argument("invalid bit in pattern");
            idx = (idx << 1) | static_cast<std::size_t>(c - '0');
        }
        CVector v = CVector::Zero(static_cast<Eigen::Index>(std::size_t{1} << m));
        v(static_cast<Eigen::Index>(idx)) = 1.0;
        return Statevector(std::move(v));
    }

    std::size_t dim() const { return static_cast<std::size_t>(amps_.size()); }
    std::size_t num_qubits() const { return num_qubits_; }
    const CVector& amplitudes() const { return amps_; }

private:
    CVector amps_;
    std::size_t num_qubits_;
};

/// Unit-trace Hermitian operator on an M-qubit register. May be aphysical
/// (negative eigenvalues), which the `physical()` flag reports.
class DensityMatrix {
public:
    explicit DensityMatrix(Matrix m) : m_(std::move(m)) {
        if (m_.rows() != m_.cols())
            throw std::invalid_argument("density matrix is not square");
        num_qubits_ = detail::log2_exact(static_cast<std::size_t>(m_.rows()));
        const double herm_err = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
        if (herm_err > kHermitianTol)
            throw std::invalid_argument("density matrix is not Hermitian");
        if (std::abs(m_.trace().real() - 1.0) > kTraceTol ||
            std::abs(m_.trace().imag()) > kTraceTol)
            throw std::invalid_argument("density matrix is not unit trace");
        Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
        min_eig_ = es.eigenvalues().minCoeff();
    }

    static DensityMatrix pure(const Statevector& psi) {
        return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
    }

    static DensityMatrix maximally_mixed(std::size_t n_qubits) {
        const auto d = static_cast<Eigen::Index>(std::size_t{1} << n_qubits);
        return DensityMatrix(Matrix::Identity(d, d) / static_cast<double>(d));
    }

    std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
    std::size_t num_qubits() const { return num_qubits_; }
    const Matrix& matrix() const { return m_; }

    double min_eigenvalue() const { return min_eig_; }
    bool physical() const { return min_eig_ >= -kEigenvalueClampTol; }

private:
    Matrix m_;
    std::size_t num_qubits_;
    double min_eig_;
};

/// Von Neumann entropy in bits. Eigenvalues in [-1e-10, 0) are clamped to 0;
/// anything more negative is an error.
inline double von_neumann_entropy(const DensityMatrix& rho) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix(), Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        double lam = es.eigenvalues()(i);
        if (lam < -kEigenvalueClampTol)
            throw std::domain_error("entropy of an aphysical density matrix");
        if (lam <= 0.0) continue;
        s -= lam * std::log2(lam);
    }
    return s;
}

/// Trace out everything except `keep`; output position i corresponds to keep[i].
inline DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<std::size_t>& keep) {
    const std::size_t m = rho.num_qubits();
    std::vector<bool> kept(m, false);
    for (std::size_t q : keep) {
        if (q >= m) throw std::invalid_argument("partial_trace: index out of range");
        if (kept[q]) throw std::invalid_argument("partial_trace: duplicate index");
        kept[q] = true;
    }
    std::vector<std::size_t> env;
    for (std::size_t q = 0; q < m; ++q)
        if (!kept[q]) env.push_back(q);

    const std::size_t k = keep.size();
    const std::size_t ek = env.size();
    const std::size_t out_dim = std::size_t{1} << k;
    const std::size_t env_dim = std::size_t{1} << ek;

    auto compose = [&](std::size_t a, std::size_t e) {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t bit = (a >> (k - 1 - i)) & 1u;
            idx |= bit << (m - 1 - keep[i]);
        }
        for (std::size_t i = 0; i < ek; ++i) {
            const std::size_t bit = (e >> (ek - 1 - i)) & 1u;
            idx |= bit << (m - 1 - env[i]);
        }
        return idx;
    };

    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(out_dim));
    for (std::size_t a = 0; a < out_dim; ++a)
        for (std::size_t b = 0; b < out_dim; ++b) {
            Complex sum(0.0, 0.0);
            for (std::size_t e = 0; e < env_dim; ++e)
                sum += rho.matrix()(static_cast<Eigen::Index>(compose(a, e)),
                                    static_cast<Eigen::Index>(compose(b, e)));
            out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = sum;
        }
    return DensityMatrix(std::move(out));
}

/// tr(rho * P); throws if the imaginary part exceeds tolerance.
inline double pauli_expectation(const DensityMatrix& rho, const PauliString& p) {
    if (p.size() != rho.num_qubits())
        throw std::invalid_argument("pauli_expectation: dimension mismatch");
    Complex tr(0.0, 0.0);
    for (std::size_t j = 0; j < rho.dim(); ++j) {
        std::size_t f;
        Complex phase;
        detail::pauli_action(p, j, f, phase);
        tr += phase * rho.matrix()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(f));
    }
    if (std::abs(tr.imag()) > 1e-9)
        throw std::domain_error("pauli_expectation: non-real trace");
    return tr.real();
}

/// Relabel register positions: output position i carries input position perm[i].
inline DensityMatrix permute_qubits(const DensityMatrix& rho, const std::vector<std::size_t>& perm) {
    const std::size_t m = rho.num_qubits();
    if (perm.size() != m) throw std::invalid_argument("permute_qubits: bad permutation size");
    const std::size_t dim = rho.dim();
    auto map_idx = [&](std::size_t j) {
        std::size_t out = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t bit = (j >> (m - 1 - perm[i])) & 1u;
            out |= bit << (m - 1 - i);
        }
        return out;
    };
    Matrix out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = 0; b < dim; ++b)
            out(static_cast<Eigen::Index>(map_idx(a)), static_cast<Eigen::Index>(map_idx(b))) =
                rho.matrix()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    return DensityMatrix(std::move(out));
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace qleak
