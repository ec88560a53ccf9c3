#include <charconv>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "config.hpp"
#include "pipeline.hpp"

namespace fs = std::filesystem;
using namespace dexct;
using namespace dexct::cli;

namespace {

constexpr int exit_not_converged = 2;

struct CoeffFlags {
    AttenuationCoeffs c;

    void add(CLI::App* app)
    {
        app->add_option("--c11", c.c11, "material 1, low energy")->capture_default_str();
        app->add_option("--c12", c.c12, "material 2, low energy")->capture_default_str();
        app->add_option("--c21", c.c21, "material 1, high energy")->capture_default_str();
        app->add_option("--c22", c.c22, "material 2, high energy")->capture_default_str();
    }
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dual-energy CT material decomposition"};
    app.set_version_flag("--version", std::string("dexct ") + DEXCT_VERSION);
    app.require_subcommand(1);

    // generate-phantom
    auto* gen = app.add_subcommand("generate-phantom", "render a two-material phantom");
    std::string gen_kind = "hy";
    PhantomSpec gen_spec;
    std::string gen_m1, gen_m2, gen_out;
    int gen_bits = 8;
    gen->add_option("--kind", gen_kind, "hy, bone, egypt_like, circuit_like or from_files")->capture_default_str();
    gen->add_option("--size", gen_spec.size, "image side N")->capture_default_str();
    gen->add_option("--seed", gen_spec.seed, "seed for procedural phantoms")->capture_default_str();
    gen->add_option("--material1", gen_m1, "container file for from_files");
    gen->add_option("--material2", gen_m2, "container file for from_files");
    gen->add_option("--pgm-bits", gen_bits, "8 or 16")->capture_default_str();
    gen->add_option("--out", gen_out, "output directory")->required();

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate a noisy dual-energy scan of a phantom");
    std::string sim_phantom, sim_out, sim_protocol = "same_operator";
    ScanMetadata sim_meta;
    sim_meta.n_angles = 65;
    sim_meta.noise_level = 0.01;
    sim_meta.rotation_deg = 45.0;
    CoeffFlags sim_coeffs;
    sim->add_option("--phantom", sim_phantom, "directory with material1.dexc and material2.dexc")->required();
    sim->add_option("--angles", sim_meta.n_angles, "projection angles over [0, 180)")->capture_default_str();
    sim->add_option("--protocol", sim_protocol, "same_operator or alternating_energy")->capture_default_str();
    sim->add_option("--pixel-size", sim_meta.pixel_size, "pixel side length")->capture_default_str();
    sim->add_option("--noise", sim_meta.noise_level, "relative noise level")->capture_default_str();
    sim->add_option("--rotation", sim_meta.rotation_deg, "object rotation in degrees")->capture_default_str();
    sim->add_option("--seed", sim_meta.noise_seed, "noise seed")->capture_default_str();
    sim_coeffs.add(sim);
    sim->add_option("--out", sim_out, "output directory")->required();

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct", "reconstruct material images from a scan");
    std::string rec_scan, rec_out, rec_method = "ip";
    RegWeights rec_w{150.0, 120.0};
    IpmConfig rec_ipm;
    JtvConfig rec_jtv;
    bool rec_timing = false;
    int rec_bits = 16;
    rec->add_option("--scan", rec_scan, "directory written by simulate")->required();
    rec->add_option("--method", rec_method, "ip or jtv")->capture_default_str();
    rec->add_option("--alpha", rec_w.alpha, "IP: penalty on ||g||^2")->capture_default_str();
    rec->add_option("--beta", rec_w.beta, "IP: penalty on g1^T g2")->capture_default_str();
    rec->add_option("--tol", rec_ipm.tol, "IP: stopping tolerance")->capture_default_str();
    rec->add_option("--max-iters", rec_ipm.max_iters, "IP: iteration cap")->capture_default_str();
    rec->add_option("--correctors", rec_ipm.n_correctors, "IP: centrality correctors")->capture_default_str();
    rec->add_option("--pcg-tol", rec_ipm.pcg_tol, "IP: PCG tolerance")->capture_default_str();
    rec->add_flag("--early-termination", rec_ipm.early_termination, "IP: stop PCG on the outer tolerance");
    rec->add_option("--seed", rec_ipm.seed, "IP: seed for diagonal sampling")->capture_default_str();
    rec->add_option("--gamma", rec_jtv.gamma, "JTV: regularisation weight")->capture_default_str();
    rec->add_option("--kappa", rec_jtv.kappa, "JTV: smoothing of |x|")->capture_default_str();
    rec->add_option("--iterations", rec_jtv.n_iters, "JTV: gradient steps")->capture_default_str();
    rec->add_flag("--record-timing", rec_timing, "add wall-clock times to the solver report");
    rec->add_option("--pgm-bits", rec_bits, "8 or 16")->capture_default_str();
    rec->add_option("--out", rec_out, "output directory")->required();

    // segment
    auto* seg = app.add_subcommand("segment", "threshold reconstructions to known material pixel counts");
    std::string seg_recon, seg_truth, seg_out;
    std::size_t seg_count1 = 0, seg_count2 = 0;
    seg->add_option("--recon", seg_recon, "directory with material1.dexc and material2.dexc")->required();
    auto* truth_opt = seg->add_option("--truth", seg_truth, "phantom directory providing the pixel counts");
    auto* c1_opt = seg->add_option("--count1", seg_count1, "pixels of material 1");
    auto* c2_opt = seg->add_option("--count2", seg_count2, "pixels of material 2");
    truth_opt->excludes(c1_opt)->excludes(c2_opt);
    c1_opt->needs(c2_opt);
    c2_opt->needs(c1_opt);
    seg->add_option("--out", seg_out, "output directory")->required();

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "compare reconstructions with the ground truth");
    std::string eva_recon, eva_truth, eva_out;
    eva->add_option("--recon", eva_recon, "directory with material1.dexc and material2.dexc")->required();
    eva->add_option("--truth", eva_truth, "phantom directory")->required();
    eva->add_option("--out", eva_out, "metrics CSV (default: stdout)");

    // run
    auto* run = app.add_subcommand("run", "run the full pipeline from a configuration file");
    std::string run_config, run_output;
    run->add_option("config", run_config, "YAML configuration")->required()->check(CLI::ExistingFile);
    run->add_option("--output", run_output, "override output.directory");

    // bench
    auto* ben = app.add_subcommand("bench", "time IP reconstructions over image sizes");
    std::string ben_config, ben_out;
    std::vector<std::string> ben_sizes;
    ben->add_option("config", ben_config, "YAML configuration (optional)")->check(CLI::ExistingFile);
    ben->add_option("--sizes", ben_sizes, "override bench.sizes")->expected(0, CLI::detail::expected_max_vector_size);
    ben->add_option("--out", ben_out, "CSV file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            gen_spec.kind = parse_phantom_kind(gen_kind);
            gen_spec.material1_path = gen_m1;
            gen_spec.material2_path = gen_m2;
            if (gen_spec.kind == PhantomKind::FROM_FILES && gen->count("--size") == 0)
                gen_spec.size = 0;
            const ImagePair g = generate(gen_spec);
            write_image_pair(gen_out, "material", g, gen_bits);
            std::cerr << "wrote " << to_string(gen_spec.kind) << " phantom, N=" << g.size() << ", fractions "
                      << material_fraction(g.first_image()) << " / " << material_fraction(g.second_image()) << '\n';
        } else if (*sim) {
            const ImagePair g = read_image_pair(sim_phantom, "material");
            validate_phantom(g);
            sim_meta.n = g.size();
            sim_meta.protocol = parse_scan_protocol(sim_protocol);
            sim_meta.coeffs = sim_coeffs.c;
            const GeometryPair geo = sim_meta.geometries();
            const SinogramPair m = simulate_measurement(g, sim_meta.coeffs, geo.low, geo.high, sim_meta.noise_level,
                                                        sim_meta.rotation_deg, sim_meta.noise_seed);
            write_scan(sim_out, m, sim_meta);
        } else if (*rec) {
            ScanMetadata meta;
            const SinogramPair m = read_scan(rec_scan, meta);
            const GeometryPair geo = meta.geometries();
            fs::create_directories(rec_out);
            if (parse_method(rec_method) == Method::IP) {
                rec_w.validate();
                const IpmReconstruction r = ipm_solve(m, meta.coeffs, rec_w, geo.low, geo.high, rec_ipm);
                r.report.write_csv(fs::path(rec_out) / "solver_report.csv", rec_timing);
                write_image_pair(rec_out, "material", r.g, rec_bits);
                std::cerr << "IPM: " << r.report.iterations << " iterations, " << r.report.total_pcg_iters
                          << " PCG iterations, " << r.report.seconds << " s\n";
                if (!r.report.converged) {
                    std::cerr << "warning: IPM did not reach the tolerance\n";
                    return exit_not_converged;
                }
            } else {
                const JtvResult r = jtv_solve(m, meta.coeffs, rec_jtv, geo.low, geo.high);
                r.report.write_csv(fs::path(rec_out) / "solver_report.csv");
                write_image_pair(rec_out, "material", r.g, rec_bits);
                if (r.report.line_search_failed) {
                    std::cerr << "warning: JTV line search failed after " << r.report.iterations << " iterations\n";
                    return exit_not_converged;
                }
            }
        } else if (*seg) {
            const ImagePair recon = read_image_pair(seg_recon, "material");
            if (!seg_truth.empty()) {
                const ImagePair truth = read_image_pair(seg_truth, "material");
                seg_count1 = count_nonzero(truth.first_image());
                seg_count2 = count_nonzero(truth.second_image());
            } else if (seg->count("--count1") == 0) {
                throw std::invalid_argument("segment needs --truth or --count1/--count2");
            }
            const Segmentation s1 = segment_by_fraction(recon.first_image(), seg_count1);
            const Segmentation s2 = segment_by_fraction(recon.second_image(), seg_count2);
            write_image_pair(seg_out, "segmentation", ImagePair(s1.mask, s2.mask), 8);
            auto out = detail::open_out(fs::path(seg_out) / "thresholds.txt");
            out << "threshold1=" << format_number(s1.threshold) << "\nthreshold2=" << format_number(s2.threshold)
                << '\n';
        } else if (*eva) {
            const Evaluation e = evaluate(read_image_pair(eva_recon, "material"), read_image_pair(eva_truth, "material"));
            if (eva_out.empty()) {
                std::cout << MetricsReport::csv_header << '\n';
                e.metrics.write_csv_row(std::cout);
            } else {
                e.metrics.write_csv(eva_out);
            }
        } else if (*run) {
            ExperimentConfig cfg = load_config(run_config);
            if (!run_output.empty())
                cfg.output.directory = run_output;
            const RunStatus status = run_experiment(cfg, std::cerr, workers_from_environment());
            if (!status.converged) {
                std::cerr << "warning: some solves did not converge; see provenance.json\n";
                return exit_not_converged;
            }
        } else if (*ben) {
            ExperimentConfig cfg = ben_config.empty() ? ExperimentConfig{} : load_config(ben_config);
            // A bare --sizes yields one empty token and selects no sizes.
            if (ben->count("--sizes")) {
                cfg.bench.sizes.clear();
                for (const auto& token : ben_sizes)
                    if (!token.empty()) {
                        std::size_t n = 0;
                        const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), n);
                        if (ec != std::errc{} || end != token.data() + token.size() || n < 8)
                            throw std::invalid_argument("--sizes: '" + token + "' is not an image size >= 8");
                        cfg.bench.sizes.push_back(n);
                    }
            }
            if (ben_out.empty()) {
                run_bench(cfg, std::cout, std::cerr);
            } else {
                auto out = detail::open_out(ben_out);
                run_bench(cfg, out, std::cerr);
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
