#pragma once

#include "smallnoise/types.hpp"

#include <array>
#include <functional>

namespace smallnoise::models {

/// Coefficient quintuple of a filtering problem
///
///   dY = f dt + sqrt(eps) sigma dW1 + sqrt(eps) g dW2
///   dZ = h dt + sqrt(eps) ell dW2
///
/// with signal Y in R^n, observation Z in R^d, and Brownian motions
/// W1 in R^{d1}, W2 in R^{d2}. All coefficients take (t, y, z) with z
/// the current observation value.
struct ModelCoefficients {
    int n = 0;
    int d = 0;
    int d1 = 0;
    int d2 = 0;

    std::function<Vec(double, const Vec&, const Vec&)> f;       // n
    std::function<Vec(double, const Vec&, const Vec&)> h;       // d
    std::function<Mat(double, const Vec&, const Vec&)> sigma;   // n x d1
    std::function<Mat(double, const Vec&, const Vec&)> g;       // n x d2
    std::function<Mat(double, const Vec&, const Vec&)> ell;     // d x d2
    std::function<Mat(double, const Vec&, const Vec&)> grad_f;  // n x n
    std::function<Mat(double, const Vec&, const Vec&)> grad_h;  // d x n

    /// Extra domain guard (square-root arguments etc). Null means the
    /// coefficients are globally defined.
    std::function<bool(double, const Vec&, const Vec&)> domain_ok;
};

struct InitialCondition {
    Vec y0;
    Vec z0;
};

/// SI+-S epidemic parameters. Rates per unit time, N the population
/// size, x0 the initial fractions (undetected, detected).
struct SisParams {
    double beta = 0.5;
    double alpha = 0.2;
    double rho_minus = 0.1;
    double rho_plus = 0.15;
    double N = 1e4;
    std::array<double, 2> x0{0.1, 0.05};

    void validate() const;
    double epsilon() const;  // 1/sqrt(N)
};

/// Exactly linear model: f = a y, h = h_mat y, constant diffusions.
/// grad_f = a and grad_h = h_mat hold exactly. Throws on singular
/// l_mat l_mat^T.
ModelCoefficients linear_model(const Mat& a, const Mat& h_mat, const Mat& s, const Mat& g_mat,
                               const Mat& l_mat);

/// Coefficient matrices of an exactly linear model, kept explicit so
/// that oracles can consume them directly.
struct LinearCoeffs {
    Mat a, h_mat, s, g_mat, l_mat;

    ModelCoefficients model() const { return linear_model(a, h_mat, s, g_mat, l_mat); }
    static LinearCoeffs scalar(double a, double h, double s, double g, double l);
};

struct SisSystem {
    ModelCoefficients model;
    InitialCondition ic;
    double epsilon;
};

/// Time-scaled SI+-S filtering system for the deviation process. The
/// drift/diffusion of the deviation pair (Y, Z) are the compartment
/// functions evaluated at x0 + eps*(y, z); initial condition (0, 0).
SisSystem sis_scaled_model(const SisParams& p);

/// True iff every coefficient evaluates finite at (y, z) and
/// ell ell^T is strictly positive definite there. Time-autonomous
/// models are probed at t = 0.
bool admissible(const ModelCoefficients& model, const Vec& y, const Vec& z);

/// Scalar model with observation drift h(y) = y^3: smooth but not
/// strongly injective near the origin. Used to exercise the negative
/// branch of the assumption checkers.
ModelCoefficients cubic_observation_model();

/// dt = 1e-3 * min(1, 1/max-rate); the step-size default used by the
/// CLI when none is configured.
double default_dt(const SisParams& p);

}  // namespace smallnoise::models
