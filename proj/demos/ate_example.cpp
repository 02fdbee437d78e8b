// Treatment effect from a fitted PLM. With regressors D = phi(T) for a scalar
// treatment T, the effect of moving T from t0 to t1 is theta^T (phi(t1) - phi(t0)).
//
//   ate_example [n] [seed]

#include <cstdio>
#include <cstdlib>

#include "osl/osl.hpp"

namespace {

osl::Vector phi(double t) { return osl::Vector{{t, t * t}}; }

} // namespace

int main(int argc, char** argv) {
    const osl::Index n = argc > 1 ? std::atol(argv[1]) : 4000;
    const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;
    if (n < 2 || n % 2 != 0) {
        std::fprintf(stderr, "n must be even and >= 2\n");
        return 2;
    }

    const osl::PlmDgp dgp = osl::PlmDgp::make_default(2, 2);
    const osl::OslContext ctx(osl::ModelKind::plm, dgp, osl::NuisanceMode::fitted());
    const osl::OslRun run = osl::run_osl(ctx, n, seed);

    const double t0 = 0.0, t1 = 1.0;
    const auto ate = [&](const osl::Vector& theta) { return theta.dot(phi(t1) - phi(t0)); };
    std::printf("theta_hat   = (%.6f, %.6f)\n", run.theta_hat[0], run.theta_hat[1]);
    std::printf("theta0      = (%.6f, %.6f)\n", dgp.theta0[0], dgp.theta0[1]);
    std::printf("ATE(%g->%g) = %.6f (true %.6f)\n", t0, t1, ate(run.theta_hat), ate(dgp.theta0));
    std::printf("excess risk = %.3e, nuisance distance = %.3e\n", run.excess_risk, run.nuisance_distance);
}
