// Command line front end. Subcommands: discriminant, spectrum, gram,
// divisor-newton, recover, mc, sample. Exit codes: 0 ok, 2 config error,
// 3 numeric failure.
#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "hill/divisor.hpp"
#include "hill/floquet.hpp"
#include "hill/harness.hpp"
#include "hill/potential.hpp"
#include "hill/pwspace.hpp"
#include "hill/spectra.hpp"
#include "hill/statistics.hpp"

namespace {

hill::PotentialSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw hill::ConfigError("cannot open spec file " + path);
    nlohmann::json j;
    in >> j;
    return j.get<hill::PotentialSpec>();
}

std::vector<double> parse_grid(const std::string& s) {
    double a, b;
    int n;
    char c1, c2;
    std::istringstream is(s);
    if (!(is >> a >> c1 >> b >> c2 >> n) || c1 != ':' || c2 != ':' || n < 2)
        throw hill::ConfigError("grid must be a:b:n with n >= 2");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = a + (b - a) * i / (n - 1);
    return g;
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty() || out_path == "-") {
        std::cout << content;
    } else {
        hill::write_text_file(out_path, content);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for Hill's equation with random periodic potentials"};
    app.require_subcommand(1);

    std::string spec_path, out_path, t_path, config_path, grid_str;
    int jmax = 8, order = 32, gaps = 2, grid_size = 256, k_index = 0, max_iter = 20;
    double tol = 1e-8;
    bool with_derivative = false, with_oracle = false, matrix_csv = false;

    auto* d = app.add_subcommand("discriminant", "Scan Delta(lambda) over a grid");
    d->add_option("--spec", spec_path, "potential spec JSON")->required();
    d->add_option("--grid", grid_str, "lambda grid a:b:n")->required();
    d->add_flag("--derivative", with_derivative, "emit d Delta / d lambda");
    d->add_option("--out", out_path, "output CSV path (default stdout)");

    auto* s = app.add_subcommand("spectrum", "Periodic and Dirichlet spectra");
    s->add_option("--spec", spec_path, "potential spec JSON")->required();
    s->add_option("--jmax", jmax, "number of gaps")->required();
    s->add_flag("--oracle", with_oracle, "attach Fourier-matrix oracle comparison CSV");
    s->add_option("--tol", tol, "root tolerance");
    s->add_option("--out", out_path, "output path (default stdout)");

    auto* g = app.add_subcommand("gram", "Gram matrix diagnostics for a sampling sequence");
    g->add_option("--t", t_path, "JSON file {\"t\": [..]} over a symmetric window")->required();
    g->add_option("--n", order, "truncation order");
    g->add_flag("--matrix-csv", matrix_csv, "emit the Gram matrix as CSV");
    g->add_option("--out", out_path, "output path (default stdout)");

    auto* dn = app.add_subcommand("divisor-newton", "Frozen-Newton divisor solve");
    dn->add_option("--spec", spec_path, "potential spec JSON")->required();
    dn->add_option("--gaps", gaps, "number of retained gaps J");
    dn->add_option("--n", order, "sampling window order");
    dn->add_option("--tol", tol, "residual tolerance");
    dn->add_option("--max-iter", max_iter, "iteration cap");
    dn->add_option("--out", out_path, "output path (default stdout)");

    auto* rc = app.add_subcommand("recover", "Inverse-spectral recovery of q");
    rc->add_option("--spec", spec_path, "potential spec JSON")->required();
    rc->add_option("--grid", grid_size, "number of s-grid points");
    rc->add_option("--jmax", jmax, "product truncation");
    rc->add_option("--k", k_index, "reference eigenvalue index");
    rc->add_option("--out", out_path, "output CSV path (default stdout)");

    auto* mc = app.add_subcommand("mc", "Monte Carlo experiments from a config file");
    mc->add_option("--config", config_path, "experiment config")->required();
    mc->add_option("--out", out_path, "output directory")->required();

    auto* sm = app.add_subcommand("sample", "Persist a weighted Gibbs sample batch");
    sm->add_option("--config", config_path, "experiment config")->required();
    sm->add_option("--out", out_path, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (d->parsed()) {
            auto spec = load_spec(spec_path);
            auto grid = parse_grid(grid_str);
            auto scan = hill::discriminant_scan(spec, grid, with_derivative);
            std::ostringstream os;
            os << (with_derivative ? "lambda,delta,delta_prime\n" : "lambda,delta\n");
            for (const auto& [lam, fs] : scan) {
                os << hill::format_double(lam) << "," << hill::format_double(fs.delta);
                if (with_derivative) os << "," << hill::format_double(fs.delta_prime);
                os << "\n";
            }
            emit(out_path, os.str());
        } else if (s->parsed()) {
            auto spec = load_spec(spec_path);
            auto sd = hill::build_spectral_data(spec, jmax, tol);
            nlohmann::json j{{"lambdas", sd.lambdas}, {"mus", sd.mus}, {"gaps", sd.gaps}};
            std::ostringstream os;
            os << j.dump(2) << "\n";
            if (with_oracle) {
                int count = std::min(12, 2 * jmax + 1);
                auto per = hill::fourier_matrix_oracle(spec, std::max(32, 2 * spec.modes()),
                                                       hill::BoundaryCondition::periodic,
                                                       count);
                auto anti = hill::fourier_matrix_oracle(spec, std::max(32, 2 * spec.modes()),
                                                        hill::BoundaryCondition::antiperiodic,
                                                        count);
                std::vector<double> oracle;
                oracle.insert(oracle.end(), per.begin(), per.end());
                oracle.insert(oracle.end(), anti.begin(), anti.end());
                std::sort(oracle.begin(), oracle.end());
                os << "index,ode,oracle,abs_diff\n";
                for (int i = 0; i < count; ++i)
                    os << i << "," << hill::format_double(sd.lambdas[i]) << ","
                       << hill::format_double(oracle[i]) << ","
                       << hill::format_double(std::abs(sd.lambdas[i] - oracle[i])) << "\n";
            }
            emit(out_path, os.str());
        } else if (g->parsed()) {
            std::ifstream in(t_path);
            if (!in) throw hill::ConfigError("cannot open t file " + t_path);
            nlohmann::json j;
            in >> j;
            hill::SamplingSequence t(j.at("t").get<std::vector<double>>());
            auto gr = hill::gram(t, std::min(order, t.n));
            auto cert = hill::riesz_certificate(t);
            nlohmann::json out{{"det2", gr.det2},      {"eig_min", gr.eig_min},
                               {"eig_max", gr.eig_max}, {"margin", cert.margin},
                               {"certified", cert.certified}};
            std::ostringstream os;
            os << out.dump(2) << "\n";
            if (matrix_csv) {
                for (int r = 0; r < gr.gamma.rows(); ++r) {
                    for (int c = 0; c < gr.gamma.cols(); ++c)
                        os << (c ? "," : "") << hill::format_double(gr.gamma(r, c));
                    os << "\n";
                }
            }
            emit(out_path, os.str());
        } else if (dn->parsed()) {
            auto spec = load_spec(spec_path);
            auto sd = hill::build_spectral_data(spec, std::max(order, gaps));
            auto st = hill::newton_divisor_solve(spec, sd, order, gaps, max_iter, tol);
            nlohmann::json out{
                {"sigma", std::vector<double>(st.sigma.data(), st.sigma.data() + st.sigma.size())},
                {"residual_inf", st.residual_inf},
                {"residual_verified", st.residual_verified},
                {"det2_Xprime0", st.det2_xprime0},
                {"iterations", st.iterations},
                {"converged", st.converged}};
            nlohmann::json div = nlohmann::json::array();
            for (const auto& e : st.divisor.entries)
                div.push_back({{"j", e.j}, {"mu", e.mu}, {"eps", e.eps}});
            out["divisor"] = div;
            emit(out_path, out.dump(2) + "\n");
        } else if (rc->parsed()) {
            auto spec = load_spec(spec_path);
            auto res = hill::recover_potential(spec, grid_size, jmax, k_index);
            nlohmann::json rec{{"s", res.s_grid},
                               {"q_true", res.q_true},
                               {"q_recovered", res.q_recovered}};
            emit(out_path, hill::emit_plot_data(rec, "recovery"));
        } else if (mc->parsed() || sm->parsed()) {
            auto cfg = hill::parse_config_file(config_path, hill::mc_config_keys());
            auto rec = hill::run_experiment(cfg, out_path);
            std::cout << rec.manifest().dump(2) << "\n";
        }
    } catch (const hill::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
