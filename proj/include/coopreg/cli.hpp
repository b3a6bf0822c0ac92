#pragma once

// Subcommands of coop-reg. Each returns the process exit status.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "coopreg/scenario.hpp"

namespace coopreg {

struct Overrides {
    std::optional<int> grid_points;
    std::optional<double> dt;
    std::optional<double> horizon;
};

/// Applies command-line overrides and re-validates the scenario.
inline void apply_overrides(Scenario& s, const Overrides& o) {
    if (o.grid_points) s.numerics.grid_points = *o.grid_points;
    if (o.dt) s.numerics.dt = *o.dt;
    if (o.horizon) s.numerics.horizon = *o.horizon;
    const auto v = scenario_violations(s);
    if (!v.empty()) {
        std::string msg = std::to_string(v.size()) + " schema violation(s) after overrides:";
        for (const auto& e : v) msg += "\n  " + e;
        throw SchemaError(msg);
    }
}

/// Writes gains.txt, certificate.json and kernel.csv to `out`.
inline int cmd_synthesize(const Scenario& s, const std::filesystem::path& out, std::ostream& log) {
    std::filesystem::create_directories(out);
    Synthesis syn;
    try {
        syn = synthesize(scenario_design(s));
    } catch (const Error& e) {
        write_text_file(out / "certificate.json", failure_certificate_json(s.mode, e).dump(2) + "\n");
        log << "synthesis failed: " << e.kind() << ": " << e.what() << "\n";
        return 1;
    }
    save_gains(out / "gains.txt", syn.gains, syn.certificate.pass);
    write_text_file(out / "certificate.json", certificate_json(syn, s.mode).dump(2) + "\n");
    write_text_file(out / "kernel.csv", kernel_csv(syn.kernel));
    log << "mode " << to_string(s.mode) << ", M = " << s.numerics.grid_points << "\n"
        << "k_v = " << syn.gains.k_v.transpose() << ", k_1 = " << syn.gains.k_1 << "\n"
        << "Riccati residual " << syn.are.residual << ", closed-loop decay " << syn.certificate.alpha_ev << "\n"
        << "certificate " << (syn.certificate.pass ? "PASS" : "FAIL") << "\n";
    return syn.certificate.pass ? 0 : 1;
}

/// Reads `gains_path`, simulates, writes trace.csv, metrics.json and
/// snapshot_<t>.csv files. Exit status 0 iff the gains are certified and the
/// tail error meets the threshold.
inline int cmd_simulate(const Scenario& s, const std::filesystem::path& gains_path, const std::filesystem::path& out,
                        std::ostream& log) {
    if (!std::filesystem::exists(gains_path)) {
        throw IoError("gains file " + gains_path.string() + " not found (run synthesize first)");
    }
    const auto gains = load_gains(gains_path);
    if (gains.gains.S.rows() != scenario_exo(s).order()) {
        throw SchemaError("gains file order " + std::to_string(gains.gains.S.rows()) +
                          " does not match the scenario signal model");
    }
    const auto loop = scenario_closed_loop(s, gains.gains, gains.certified);
    std::filesystem::create_directories(out);
    const auto trace = simulate(loop, scenario_sim_options(s));
    const auto metrics = error_metrics(trace, s.output.error_threshold.value_or(-1.0));
    write_text_file(out / "trace.csv", trace_csv(trace));
    write_text_file(out / "metrics.json", metrics_json(trace, metrics).dump(2) + "\n");
    for (const auto& snap : trace.snapshots) {
        write_text_file(out / ("snapshot_t" + format_double(snap.time) + ".csv"), snapshot_csv(snap));
    }
    if (!gains.certified) log << "warning: gains are not certified\n";
    log << "tail error " << metrics.tail_error << " (threshold " << metrics.threshold << "), decay rate "
        << metrics.decay_rate << "\n";
    return gains.certified && metrics.tail_bound_met ? 0 : 1;
}

struct CheckRow {
    std::string hypothesis;
    std::string condition;
    bool pass = false;
    std::string evidence;
};

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::setprecision(6) << v;
    return ss.str();
}

}  // namespace detail

/// Evaluates every checkable design hypothesis in pipeline order. A stage
/// whose inputs failed is reported as not evaluated (fail).
inline std::vector<CheckRow> run_checks(const Scenario& s) {
    using detail::fmt;
    std::vector<CheckRow> rows;
    const bool leader = s.mode == Mode::LeaderFollower;
    const auto topo = scenario_topology(s);
    const auto design = scenario_design(s);
    const int n = topo.size();

    const bool connected = is_connected(leader ? topo : topo.without_leader(), leader);
    rows.push_back({"graph connectivity",
                    leader ? "leader node 0 reaches every agent" : "follower graph has a spanning tree", connected,
                    connected ? "all " + std::to_string(n) + " agents reached" : "some agent is unreachable"});

    const auto gm = laplacian(leader ? topo : topo.without_leader());
    const bool rank_ok = internal_model_rank_check(s.mode, gm);
    rows.push_back({"internal model rank", leader ? "det H != 0" : "rank H~ = N - 1", rank_ok,
                    "rank " + std::to_string(numerical_rank(leader ? gm.leader_follower
                                                                   : (n >= 2 ? theta_decompose(gm.laplacian).h_tilde()
                                                                             : gm.laplacian)))});

    double bound = 0.0;
    bool bound_ok = false;
    if (leader || n >= 2) {
        bound = spectral_lower_bound(coupling_matrix(s.mode, gm));
        bound_ok = bound > kZeroEigenvalueTolerance;
    }
    rows.push_back({"coupling spectrum", leader ? "min Re sigma(H) > 0" : "min Re sigma(L~22) > 0", bound_ok,
                    "min Re = " + fmt(bound)});
    const double nu = s.design.nu.value_or(bound);
    const bool nu_ok = bound_ok && nu > 0.0 && nu <= bound + 1e-3;
    rows.push_back({"gain scaling", "0 < nu <= min Re sigma (+1e-3)", nu_ok, "nu = " + fmt(nu)});

    const bool exo_ok = is_marginally_stable_diagonalizable(design.S);
    rows.push_back({"signal model", "S diagonalizable with sigma(S) on the imaginary axis", exo_ok,
                    "n_w = " + std::to_string(design.S.rows())});
    const bool by_ok = check_controllable(design.S, design.b_y);
    rows.push_back({"internal model input", "(S, b_y) controllable", by_ok,
                    "rank " + std::to_string(numerical_rank(controllability_matrix(design.S, design.b_y))) + " of " +
                        std::to_string(design.S.rows())});

    rows.push_back({"target decay", "mu_c > 0", s.design.mu_c > 0.0, "mu_c = " + fmt(s.design.mu_c)});
    bool resonance_ok = true;
    std::string resonance_ev = "no eigenvalue of mu_c I + S on -(k pi)^2";
    try {
        require_nonresonant(s.design.mu_c * Matrix::Identity(design.S.rows(), design.S.rows()) + design.S,
                            "mu_c I + S");
    } catch (const ResonantSpectrum& e) {
        resonance_ok = false;
        resonance_ev = e.what();
    }
    rows.push_back({"non-resonance", "sigma(S) avoids -mu_c - (k pi)^2", resonance_ok, resonance_ev});

    double min_lambda = std::numeric_limits<double>::infinity();
    for (const auto& a : s.agents) {
        min_lambda = std::min(min_lambda, 1.0 + a.delta_lambda.sample(s.numerics.grid_points).values().minCoeff());
    }
    rows.push_back({"diffusion", "1 + delta_lambda_i(z) > 0", min_lambda > 0.0, "min = " + fmt(min_lambda)});

    auto skipped = [&](const std::string& h, const std::string& c) { rows.push_back({h, c, false, "not evaluated"}); };
    auto failed = [&](const std::string& h, const std::string& c, const Error& e) {
        rows.push_back({h, c, false, e.kind() + ": " + e.what()});
    };

    // Kernel and transformed output.
    std::optional<TriangularKernel> k, ki;
    std::optional<OutputOperator> c_tilde;
    try {
        design.plant.output.validate();
        k = solve_kernel(design.plant.a, design.plant.q0, design.mu_c, design.kernel);
        ki = invert_kernel(*k);
        c_tilde = transform_output_weight(design.plant.output, *ki);
        const int m = k->intervals();
        rows.push_back({"backstepping kernel", "successive approximation converges", true,
                        "k(1,1) = " + fmt((*k)(m, m))});
    } catch (const Error& e) {
        failed("backstepping kernel", "successive approximation converges", e);
    }

    std::optional<DecouplingSolution> dec;
    if (c_tilde && resonance_ok) {
        try {
            dec = solve_decoupling(design.S, design.b_y, *c_tilde, design.mu_c, *k);
        } catch (const Error& e) {
            failed("decoupling equations", "boundary value problem solvable", e);
        }
    }

    std::optional<ControllabilityReport> ctrl;
    if (dec) {
        try {
            ctrl = check_controllable_pair(design.S, design.b_y, dec->q_tilde_at_1, *c_tilde, design.mu_c);
            double min_n = std::numeric_limits<double>::infinity();
            for (const auto& v : ctrl->numerators) min_n = std::min(min_n, std::abs(v));
            rows.push_back({"nonblocking", "|n(lambda)| > 1e-6 for lambda in sigma(S)", ctrl->nonblocking,
                            "min |n| = " + fmt(min_n)});
            double min_c = ctrl->pbh_components.empty()
                               ? 0.0
                               : *std::min_element(ctrl->pbh_components.begin(), ctrl->pbh_components.end());
            rows.push_back({"regulator input", "(S, q~(1)) controllable", ctrl->controllable,
                            "min PBH component = " + fmt(min_c)});
        } catch (const Error& e) {
            failed("nonblocking", "|n(lambda)| > 1e-6 for lambda in sigma(S)", e);
        }
    } else {
        skipped("nonblocking", "|n(lambda)| > 1e-6 for lambda in sigma(S)");
    }

    std::optional<AreSolution> are;
    if (ctrl && ctrl->controllable && nu > 0.0) {
        try {
            are = solve_are(design.S, dec->q_tilde_at_1, nu, design.are_weight);
            Eigen::SelfAdjointEigenSolver<Matrix> qe(are->Q);
            rows.push_back({"Riccati equation", "Q = Q^T > 0 solves the ARE", qe.eigenvalues().minCoeff() > 0.0,
                            "residual " + fmt(are->residual) + ", min eig " + fmt(qe.eigenvalues().minCoeff())});
        } catch (const Error& e) {
            failed("Riccati equation", "Q = Q^T > 0 solves the ARE", e);
        }
    } else {
        skipped("Riccati equation", "Q = Q^T > 0 solves the ARE");
    }

    std::optional<StabilityCertificate> cert;
    if (are && bound_ok) {
        const Vector k_v = feedback_gain(are->Q, dec->q_tilde_at_1);
        cert = certify_stability(s.mode, design.S, dec->q_tilde_at_1, k_v, gm, design.mu_c);
        rows.push_back({"closed-loop stability", leader ? "I x S - H x q~(1) k_v^T Hurwitz"
                                                        : "I x S - L~22 x q~(1) k_v^T Hurwitz",
                        cert->pass, "decay rate " + fmt(cert->overall_alpha)});
        if (!leader && cert->pass) {
            try {
                const auto theta = theta_decompose(gm.laplacian);
                const Matrix f = closed_loop_matrix(design.S, dec->q_tilde_at_1, k_v, theta.l22);
                const auto sync = sync_steady_state(design.S, k_v, dec->q_tilde_at_1, theta.l12, f, design.mu_c,
                                                    *c_tilde);
                double spread = 0.0;
                for (Eigen::Index r = 1; r < sync.y_inf_map.rows(); ++r) {
                    spread = std::max(spread, (sync.y_inf_map.row(r) - sync.y_inf_map.row(0)).cwiseAbs().maxCoeff());
                }
                rows.push_back({"synchronized steady state", "rows of C[Sigma1] equal", spread <= 1e-6,
                                "max row difference " + fmt(spread)});
            } catch (const Error& e) {
                failed("synchronized steady state", "rows of C[Sigma1] equal", e);
            }
        }
    } else {
        skipped("closed-loop stability", "closed-loop matrix Hurwitz");
    }
    return rows;
}

inline int cmd_check(const Scenario& s, std::ostream& out) {
    const auto rows = run_checks(s);
    std::size_t w0 = 10, w1 = 9;
    for (const auto& r : rows) {
        w0 = std::max(w0, r.hypothesis.size());
        w1 = std::max(w1, r.condition.size());
    }
    out << std::left << std::setw(static_cast<int>(w0)) << "hypothesis" << "  " << std::setw(static_cast<int>(w1))
        << "condition" << "  result  evidence\n";
    bool all = true;
    for (const auto& r : rows) {
        out << std::left << std::setw(static_cast<int>(w0)) << r.hypothesis << "  " << std::setw(static_cast<int>(w1))
            << r.condition << "  " << (r.pass ? "pass  " : "FAIL  ") << "  " << r.evidence << "\n";
        all = all && r.pass;
    }
    out << (all ? "all hypotheses hold\n" : "some hypotheses fail\n");
    return all ? 0 : 1;
}

}  // namespace coopreg
