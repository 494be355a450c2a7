#pragma once

// Dense tanh network with a scalar output and hand-written backprop. No
// hidden layers gives a linear model. Kept small and explicit so gradients
// can be checked against finite differences.

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "scriptworld/errors.hpp"
#include "scriptworld/rng.hpp"

namespace scriptworld::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Weights and biases per layer; also used for gradients.
struct Params {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    std::size_t size() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l)
            n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
        return n;
    }

    Params zeros_like() const {
        Params p;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            p.weights.push_back(Matrix::Zero(weights[l].rows(), weights[l].cols()));
            p.biases.push_back(Vector::Zero(biases[l].size()));
        }
        return p;
    }

    Vector flat() const {
        Vector out(static_cast<Eigen::Index>(size()));
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            out.segment(k, weights[l].size()) = weights[l].reshaped();
            k += weights[l].size();
            out.segment(k, biases[l].size()) = biases[l];
            k += biases[l].size();
        }
        return out;
    }

    void set_flat(const Vector& v) {
        if (static_cast<std::size_t>(v.size()) != size()) throw ShapeMismatch("flat parameter size mismatch");
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            weights[l].reshaped() = v.segment(k, weights[l].size());
            k += weights[l].size();
            biases[l] = v.segment(k, biases[l].size());
            k += biases[l].size();
        }
    }

    /// this += scale * other
    void axpy(double scale, const Params& other) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            weights[l] += scale * other.weights[l];
            biases[l] += scale * other.biases[l];
        }
    }

    bool all_finite() const {
        for (std::size_t l = 0; l < weights.size(); ++l)
            if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
        return true;
    }

    friend bool operator==(const Params& a, const Params& b) {
        if (a.weights.size() != b.weights.size()) return false;
        for (std::size_t l = 0; l < a.weights.size(); ++l)
            if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
        return true;
    }
};

/// Activations saved by forward() for backward().
struct Tape {
    std::vector<Vector> activations;
};

class Mlp {
public:
    Mlp() = default;

    /// Uniform init in +-1/sqrt(fan_in).
    Mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, Rng& rng) : input_dim_(input_dim) {
        if (input_dim == 0) throw ShapeMismatch("input dim must be positive");
        std::size_t fan_in = input_dim;
        auto add_layer = [&](std::size_t fan_out) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            Matrix w(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
            Vector b(static_cast<Eigen::Index>(fan_out));
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
            for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
            params_.weights.push_back(std::move(w));
            params_.biases.push_back(std::move(b));
            fan_in = fan_out;
        };
        for (std::size_t h : hidden) {
            if (h == 0) throw ShapeMismatch("hidden layer width must be positive");
            add_layer(h);
        }
        add_layer(1);
    }

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t layers() const noexcept { return params_.weights.size(); }
    Params& params() noexcept { return params_; }
    const Params& params() const noexcept { return params_; }

    double forward(const Vector& x) const {
        check_input(x);
        Vector a = x;
        for (std::size_t l = 0; l + 1 < layers(); ++l) a = (params_.weights[l] * a + params_.biases[l]).array().tanh();
        return (params_.weights.back() * a + params_.biases.back())[0];
    }

    double forward(const Vector& x, Tape& tape) const {
        check_input(x);
        tape.activations.assign(1, x);
        for (std::size_t l = 0; l + 1 < layers(); ++l)
            tape.activations.push_back((params_.weights[l] * tape.activations.back() + params_.biases[l]).array().tanh());
        return (params_.weights.back() * tape.activations.back() + params_.biases.back())[0];
    }

    /// Adds d(out)/d(params) * dout into grad.
    void backward(const Tape& tape, double dout, Params& grad) const {
        Vector dz = Vector::Constant(1, dout);
        for (std::size_t l = layers(); l-- > 0;) {
            const Vector& a = tape.activations[l];
            grad.weights[l].noalias() += dz * a.transpose();
            grad.biases[l] += dz;
            if (l == 0) break;
            Vector da = params_.weights[l].transpose() * dz;
            dz = da.array() * (1.0 - a.array().square());
        }
    }

private:
    void check_input(const Vector& x) const {
        if (static_cast<std::size_t>(x.size()) != input_dim_)
            throw ShapeMismatch("network expects input of size " + std::to_string(input_dim_) + ", got " +
                                std::to_string(x.size()));
    }

    std::size_t input_dim_ = 0;
    Params params_;
};

} // namespace scriptworld::nn
