#pragma once

#include <cmath>

#include "error.hpp"

namespace bioage {

// Gompertz law in biological age, pinned at (kappa0, lambda0) and (kappaT, lambdaT).
class HazardModel {
public:
    static HazardModel from_pinned(double lambda0, double lambdaT, double kappa0, double kappaT)
    {
        require(lambda0 > 0.0 && std::isfinite(lambda0), "lambda0 must be positive");
        require(lambdaT > lambda0 && std::isfinite(lambdaT), "lambdaT must exceed lambda0");
        require(kappaT > kappa0, "kappaT must exceed kappa0");
        HazardModel m;
        m.lambda0_ = lambda0;
        m.lambdaT_ = lambdaT;
        m.kappa0_ = kappa0;
        m.kappaT_ = kappaT;
        m.b_ = (kappaT - kappa0) / std::log(lambdaT / lambda0);
        m.m_ = kappa0 - m.b_ * std::log(m.b_ * lambda0);
        return m;
    }

    // lambda(a) = exp((a - m)/b) / b; pins recovered at kappa0 and kappaT.
    static HazardModel from_gompertz(double m, double b, double kappa0, double kappaT)
    {
        require(b > 0.0 && std::isfinite(m), "Gompertz dispersion must be positive");
        require(kappaT > kappa0, "kappaT must exceed kappa0");
        return from_pinned(std::exp((kappa0 - m) / b) / b, std::exp((kappaT - m) / b) / b,
                           kappa0, kappaT);
    }

    double lambda0() const { return lambda0_; }
    double lambdaT() const { return lambdaT_; }
    double kappa0() const { return kappa0_; }
    double kappaT() const { return kappaT_; }
    double horizon() const { return kappaT_ - kappa0_; }
    double m() const { return m_; }
    double b() const { return b_; }

    double hazard(double a) const { return lambda0_ * std::exp((a - kappa0_) / b_); }

    // Deterministic ageing from kappa0, pure Gompertz for every s.
    double gompertz_survival(double s) const
    {
        return std::exp(b_ * lambda0_ * (1.0 - std::exp(s / b_)));
    }

    // Model survival along a = kappa_s: Gompertz up to T, then the hazard stays at lambdaT.
    double survival(double s) const
    {
        const double T = horizon();
        if (s <= T)
            return gompertz_survival(s);
        return gompertz_survival(T) * std::exp(-lambdaT_ * (s - T));
    }

    bool operator==(const HazardModel&) const = default;

private:
    HazardModel() = default;

    double lambda0_ = 0, lambdaT_ = 0, kappa0_ = 0, kappaT_ = 0;
    double m_ = 0, b_ = 0;
};

inline HazardModel canonical_hazard()
{
    return HazardModel::from_pinned(0.005, 1.0, 60.0, 110.0);
}

} // namespace bioage
