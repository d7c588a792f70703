#include "aulmpm/constitutive.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "aulmpm/errors.hpp"

namespace aulmpm {

MaterialKind parse_material_kind(std::string_view name)
{
    if (name == "fixed_corotated")
        return MaterialKind::fixed_corotated;
    if (name == "snow")
        return MaterialKind::snow;
    if (name == "weakly_compressible_fluid")
        return MaterialKind::weakly_compressible_fluid;
    throw ConfigurationError("unknown material kind '" + std::string(name) + "'");
}

std::string_view to_string(MaterialKind kind)
{
    switch (kind) {
    case MaterialKind::fixed_corotated:
        return "fixed_corotated";
    case MaterialKind::snow:
        return "snow";
    case MaterialKind::weakly_compressible_fluid:
        return "weakly_compressible_fluid";
    }
    return "unknown";
}

MaterialModel MaterialModel::from_young(MaterialKind kind, double youngs, double poisson, double density)
{
    MaterialModel m;
    m.kind = kind;
    m.mu = youngs / (2.0 * (1.0 + poisson));
    m.lambda = youngs * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    m.rho0 = density;
    return m;
}

void MaterialModel::validate() const
{
    if (!(rho0 > 0.0))
        throw ConfigurationError("material: density must be positive");
    switch (kind) {
    case MaterialKind::snow:
        if (!(1.0 - theta_c > 0.0 && 1.0 - theta_c < 1.0 + theta_s))
            throw ConfigurationError("material: snow clamp bounds need 0 < 1 - theta_c < 1 + theta_s");
        [[fallthrough]];
    case MaterialKind::fixed_corotated:
        if (!(mu >= 0.0 && lambda >= 0.0))
            throw ConfigurationError("material: Lame parameters must be non-negative");
        break;
    case MaterialKind::weakly_compressible_fluid:
        if (!(bulk > 0.0))
            throw ConfigurationError("material: fluid bulk stiffness must be positive");
        if (!(gamma >= 1.0))
            throw ConfigurationError("material: fluid exponent gamma must be >= 1");
        break;
    }
}

double MaterialModel::hardened_mu(double plastic_J) const
{
    return kind == MaterialKind::snow ? mu * std::exp(hardening * (1.0 - plastic_J)) : mu;
}

double MaterialModel::hardened_lambda(double plastic_J) const
{
    return kind == MaterialKind::snow ? lambda * std::exp(hardening * (1.0 - plastic_J)) : lambda;
}

double MaterialModel::wave_speed(double J) const
{
    if (kind == MaterialKind::weakly_compressible_fluid) {
        const double Jc = std::max(J, kFluidMinJ);
        return std::sqrt(bulk * gamma * std::pow(Jc, 1.0 - gamma) / rho0);
    }
    return std::sqrt((lambda + 2.0 * mu) / rho0);
}

template <int Dim>
PolarDecomposition<Dim> polar_decompose(const Mat<Dim>& F)
{
    PolarDecomposition<Dim> out;
    if constexpr (Dim == 2) {
        const double x = F(0, 0) + F(1, 1);
        const double y = F(1, 0) - F(0, 1);
        const double n = std::hypot(x, y);
        double c = 1.0, s = 0.0;
        if (n > 0.0) {
            c = x / n;
            s = y / n;
        }
        out.R << c, -s, s, c;
        out.S = out.R.transpose() * F;
        out.S = 0.5 * (out.S + out.S.transpose()).eval();
    } else {
        Eigen::JacobiSVD<Mat<Dim>> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Mat<Dim> U = svd.matrixU();
        Mat<Dim> V = svd.matrixV();
        Vec<Dim> sigma = svd.singularValues();
        if (U.determinant() < 0.0) {
            U.col(Dim - 1) *= -1.0;
            sigma[Dim - 1] *= -1.0;
        }
        if (V.determinant() < 0.0) {
            V.col(Dim - 1) *= -1.0;
            sigma[Dim - 1] *= -1.0;
        }
        out.R = U * V.transpose();
        out.S = V * sigma.asDiagonal() * V.transpose();
    }
    return out;
}

template <int Dim>
Mat<Dim> cofactor(const Mat<Dim>& F)
{
    Mat<Dim> C;
    if constexpr (Dim == 2) {
        C << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);
    } else {
        const Vec<3> f0 = F.col(0), f1 = F.col(1), f2 = F.col(2);
        C.col(0) = f1.cross(f2);
        C.col(1) = f2.cross(f0);
        C.col(2) = f0.cross(f1);
    }
    return C;
}

namespace {

// Directional derivative of the cofactor at F along dF.
template <int Dim>
Mat<Dim> cofactor_derivative(const Mat<Dim>& F, const Mat<Dim>& dF)
{
    if constexpr (Dim == 2) {
        return cofactor<2>(dF);
    } else {
        Mat<Dim> C;
        const Vec<3> f0 = F.col(0), f1 = F.col(1), f2 = F.col(2);
        const Vec<3> d0 = dF.col(0), d1 = dF.col(1), d2 = dF.col(2);
        C.col(0) = d1.cross(f2) + f1.cross(d2);
        C.col(1) = d2.cross(f0) + f2.cross(d0);
        C.col(2) = d0.cross(f1) + f0.cross(d1);
        return C;
    }
}

// Rotation variation dR = R W from dF, where W S + S W = R^T dF - dF^T R.
template <int Dim>
Mat<Dim> rotation_derivative(const PolarDecomposition<Dim>& polar, const Mat<Dim>& dF)
{
    const Mat<Dim> A = polar.R.transpose() * dF;
    const Mat<Dim> M = A - A.transpose();
    Mat<Dim> W = Mat<Dim>::Zero();
    if constexpr (Dim == 2) {
        double tr = polar.S.trace();
        if (std::abs(tr) < 1e-12)
            tr = tr < 0.0 ? -1e-12 : 1e-12;
        const double w = M(1, 0) / tr;
        W << 0.0, -w, w, 0.0;
    } else {
        const Vec<3> axial(M(2, 1), M(0, 2), M(1, 0));
        const Mat<3> sys = polar.S.trace() * Mat<3>::Identity() - polar.S;
        const Vec<3> omega = sys.fullPivLu().solve(axial);
        W << 0.0, -omega[2], omega[1], omega[2], 0.0, -omega[0], -omega[1], omega[0], 0.0;
    }
    return polar.R * W;
}

double fluid_energy(double J, const MaterialModel& m)
{
    if (m.gamma == 1.0)
        return m.bulk * (J - std::log(J) - 1.0);
    const double g = m.gamma;
    return m.bulk * (J + std::pow(J, 1.0 - g) / (g - 1.0)) - m.bulk * g / (g - 1.0);
}

// dPsi/dJ = -p(J).
double fluid_energy_dJ(double J, const MaterialModel& m)
{
    return m.bulk * (1.0 - std::pow(J, -m.gamma));
}

double fluid_energy_dJ2(double J, const MaterialModel& m)
{
    return m.bulk * m.gamma * std::pow(J, -m.gamma - 1.0);
}

} // namespace

template <int Dim>
StressState<Dim> energy_and_piola(const Mat<Dim>& F, const MaterialModel& model, double plastic_J)
{
    if (!F.allFinite())
        throw ContractViolation("energy_and_piola: non-finite deformation gradient");
    StressState<Dim> out;
    const double J = F.determinant();
    switch (model.kind) {
    case MaterialKind::fixed_corotated:
    case MaterialKind::snow: {
        const double mu = model.hardened_mu(plastic_J);
        const double lambda = model.hardened_lambda(plastic_J);
        const auto polar = polar_decompose<Dim>(F);
        const Mat<Dim> FmR = F - polar.R;
        out.psi = mu * FmR.squaredNorm() + 0.5 * lambda * (J - 1.0) * (J - 1.0);
        out.P = 2.0 * mu * FmR + lambda * (J - 1.0) * cofactor<Dim>(F);
        break;
    }
    case MaterialKind::weakly_compressible_fluid: {
        double Jc = J;
        if (Jc < kFluidMinJ) {
            Jc = kFluidMinJ;
            out.clamped_J = true;
        }
        out.psi = fluid_energy(Jc, model);
        out.P = fluid_energy_dJ(Jc, model) * cofactor<Dim>(F);
        break;
    }
    }
    return out;
}

template <int Dim>
Mat<Dim> mapped_stress(const Mat<Dim>& P0, const Mat<Dim>& F0s, double J0s)
{
    if (!(J0s > 0.0))
        throw InvalidConfigurationError("mapped_stress: J_0s must be positive");
    return P0 * F0s.transpose() / J0s;
}

template <int Dim>
PlasticSplit<Dim> plastic_project(const Mat<Dim>& F_elastic, const Mat<Dim>& F_plastic, const MaterialModel& model)
{
    if (model.kind != MaterialKind::snow)
        throw ContractViolation("plastic_project: material is not snow");
    Eigen::JacobiSVD<Mat<Dim>> svd(F_elastic, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat<Dim> U = svd.matrixU();
    Mat<Dim> V = svd.matrixV();
    Vec<Dim> sigma = svd.singularValues();
    if (U.determinant() < 0.0) {
        U.col(Dim - 1) *= -1.0;
        sigma[Dim - 1] *= -1.0;
    }
    if (V.determinant() < 0.0) {
        V.col(Dim - 1) *= -1.0;
        sigma[Dim - 1] *= -1.0;
    }
    const double lo = 1.0 - model.theta_c;
    const double hi = 1.0 + model.theta_s;
    bool inside = true;
    for (int d = 0; d < Dim; ++d)
        inside = inside && sigma[d] >= lo && sigma[d] <= hi;
    if (inside)
        return {F_elastic, F_plastic};

    Vec<Dim> clamped = sigma;
    for (int d = 0; d < Dim; ++d)
        clamped[d] = std::clamp(sigma[d], lo, hi);
    PlasticSplit<Dim> out;
    out.F_elastic = U * clamped.asDiagonal() * V.transpose();
    const Vec<Dim> ratio = sigma.cwiseQuotient(clamped);
    out.F_plastic = V * ratio.asDiagonal() * V.transpose() * F_plastic;
    return out;
}

template <int Dim>
Mat<Dim> hessian_action(const Mat<Dim>& F, const Mat<Dim>& dF, const MaterialModel& model, double plastic_J)
{
    if (!F.allFinite() || !dF.allFinite())
        throw ContractViolation("hessian_action: non-finite input");
    switch (model.kind) {
    case MaterialKind::fixed_corotated:
    case MaterialKind::snow: {
        const double mu = model.hardened_mu(plastic_J);
        const double lambda = model.hardened_lambda(plastic_J);
        const auto polar = polar_decompose<Dim>(F);
        const Mat<Dim> dR = rotation_derivative<Dim>(polar, dF);
        const Mat<Dim> C = cofactor<Dim>(F);
        const double J = F.determinant();
        return 2.0 * mu * (dF - dR) + lambda * (C.cwiseProduct(dF).sum()) * C
               + lambda * (J - 1.0) * cofactor_derivative<Dim>(F, dF);
    }
    case MaterialKind::weakly_compressible_fluid: {
        const double J = std::max(F.determinant(), kFluidMinJ);
        const Mat<Dim> C = cofactor<Dim>(F);
        return fluid_energy_dJ2(J, model) * (C.cwiseProduct(dF).sum()) * C
               + fluid_energy_dJ(J, model) * cofactor_derivative<Dim>(F, dF);
    }
    }
    throw CapabilityError("hessian_action: unsupported material");
}

#define AULMPM_INSTANTIATE(D)                                                                                    \
    template PolarDecomposition<D> polar_decompose<D>(const Mat<D>&);                                            \
    template Mat<D> cofactor<D>(const Mat<D>&);                                                                  \
    template StressState<D> energy_and_piola<D>(const Mat<D>&, const MaterialModel&, double);                    \
    template Mat<D> mapped_stress<D>(const Mat<D>&, const Mat<D>&, double);                                      \
    template PlasticSplit<D> plastic_project<D>(const Mat<D>&, const Mat<D>&, const MaterialModel&);             \
    template Mat<D> hessian_action<D>(const Mat<D>&, const Mat<D>&, const MaterialModel&, double);

AULMPM_INSTANTIATE(2)
AULMPM_INSTANTIATE(3)

#undef AULMPM_INSTANTIATE

} // namespace aulmpm
