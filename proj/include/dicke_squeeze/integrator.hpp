// integrator.hpp: adaptive Dormand-Prince 5(4) over complex Eigen matrices,
// using Boost.Odeint's dense-output stepper on a real view of the state.

#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>
#include <boost/numeric/odeint/external/eigen/eigen.hpp>

#include "dicke_squeeze/error.hpp"
#include "dicke_squeeze/hilbert.hpp"

namespace dicke {

struct Tolerances {
    double rtol = 1e-8;
    double atol = 1e-10;
    double initial_step = 0.0;  ///< 0: automatic
    std::size_t max_steps = 2'000'000;

    friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

struct IntegratorStats {
    std::size_t steps = 0;
    std::size_t rhs_calls = 0;
};

/// Integrates dy/dt = f(t, y) for a complex row-major matrix y. Rhs is called
/// as rhs(t, Map<const Mat>, Map<Mat>), so it must accept Eigen maps.
///
/// Sampling never shortens steps: states between steps come from the
/// stepper's continuous extension.
template <class Mat, class Rhs>
class Integrator {
    using Real = Eigen::VectorXd;
    using Stepper = boost::numeric::odeint::runge_kutta_dopri5<Real, double, Real, double,
                                                               boost::numeric::odeint::vector_space_algebra>;
    using Dense = typename boost::numeric::odeint::result_of::make_dense_output<Stepper>::type;

public:
    Integrator(Rhs rhs, Tolerances tol)
        : rhs_(std::move(rhs)), tol_(tol), dense_(boost::numeric::odeint::make_dense_output(tol.atol, tol.rtol, Stepper())) {}

    /// Advances y from t to t_end; the stepper keeps its state across calls.
    void advance(double& t, double t_end, Mat& y) {
        if (t_end <= t) return;
        rows_ = y.rows();
        cols_ = y.cols();
        auto system = [this](const Real& x, Real& dx, double time) {
            dx.resize(x.size());
            rhs_(time, view(x), view(dx));
            ++stats_.rhs_calls;
        };
        if (!started_) {
            x_ = Eigen::Map<const Real>(reinterpret_cast<const double*>(y.data()), 2 * y.size());
            const double h0 = tol_.initial_step > 0.0 ? tol_.initial_step : 1e-3 * (t_end - t);
            dense_.initialize(x_, t, h0);
            started_ = true;
        }
        try {
            while (dense_.current_time() < t_end) {
                if (++stats_.steps > tol_.max_steps)
                    throw IntegrationError("step budget exhausted at t=" + std::to_string(dense_.current_time()));
                dense_.do_step(system);
                if (!dense_.current_state().allFinite())
                    throw IntegrationError("non-finite state at t=" + std::to_string(dense_.current_time()));
            }
        } catch (const boost::numeric::odeint::step_adjustment_error& e) {
            throw IntegrationError(std::string("step size control failed: ") + e.what());
        }
        dense_.calc_state(t_end, x_);
        Eigen::Map<Real>(reinterpret_cast<double*>(y.data()), 2 * y.size()) = x_;
        t = t_end;
    }

    [[nodiscard]] const IntegratorStats& stats() const { return stats_; }

private:
    using RowMap = Eigen::Map<Mat>;
    using ConstRowMap = Eigen::Map<const Mat>;

    ConstRowMap view(const Real& x) const { return ConstRowMap(reinterpret_cast<const cplx*>(x.data()), rows_, cols_); }
    RowMap view(Real& x) const { return RowMap(reinterpret_cast<cplx*>(x.data()), rows_, cols_); }

    Rhs rhs_;
    Tolerances tol_;
    Dense dense_;
    IntegratorStats stats_;
    Real x_;
    Eigen::Index rows_ = 0, cols_ = 0;
    bool started_ = false;
};

template <class Mat, class Rhs>
Integrator<Mat, Rhs> make_integrator(Rhs rhs, Tolerances tol) {
    return Integrator<Mat, Rhs>(std::move(rhs), tol);
}

}  // namespace dicke
