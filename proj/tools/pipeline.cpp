#include "pipeline.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#ifndef DEXCT_VERSION
#define DEXCT_VERSION "unknown"
#endif

namespace dexct::cli {

namespace fs = std::filesystem;

std::string format_number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::size_t workers_from_environment()
{
    if (const char* env = std::getenv("DEXCT_WORKERS")) {
        std::size_t value = 0;
        const std::string s(env);
        const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || value == 0)
            throw std::invalid_argument("DEXCT_WORKERS must be a positive integer, got '" + s + "'");
        return value;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void write_metadata(const fs::path& path, const ScanMetadata& m)
{
    auto out = detail::open_out(path);
    out << "n=" << m.n << '\n'
        << "angles=" << m.n_angles << '\n'
        << "protocol=" << to_string(m.protocol) << '\n'
        << "pixel_size=" << format_number(m.pixel_size) << '\n'
        << "c11=" << format_number(m.coeffs.c11) << '\n'
        << "c12=" << format_number(m.coeffs.c12) << '\n'
        << "c21=" << format_number(m.coeffs.c21) << '\n'
        << "c22=" << format_number(m.coeffs.c22) << '\n'
        << "noise_level=" << format_number(m.noise_level) << '\n'
        << "rotation_deg=" << format_number(m.rotation_deg) << '\n'
        << "noise_seed=" << m.noise_seed << '\n';
}

ScanMetadata read_metadata(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end())
            throw std::runtime_error(path.string() + ": missing key '" + key + "'");
        return it->second;
    };
    auto number = [&](const std::string& key) {
        const std::string& s = get(key);
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw std::runtime_error(path.string() + ": key '" + key + "' is not a number: " + s);
        return v;
    };
    auto integer = [&](const std::string& key) {
        const std::string& s = get(key);
        std::uint64_t v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw std::runtime_error(path.string() + ": key '" + key + "' is not an integer: " + s);
        return v;
    };
    ScanMetadata m;
    m.n = integer("n");
    m.n_angles = integer("angles");
    m.protocol = parse_scan_protocol(get("protocol"));
    m.pixel_size = number("pixel_size");
    m.coeffs = {number("c11"), number("c12"), number("c21"), number("c22")};
    m.noise_level = number("noise_level");
    m.rotation_deg = number("rotation_deg");
    m.noise_seed = integer("noise_seed");
    return m;
}

void write_image_pair(const fs::path& dir, const std::string& stem, const ImagePair& g, int pgm_bits)
{
    const Image a = g.first_image();
    const Image b = g.second_image();
    save_image(dir / (stem + "1.dexc"), a);
    save_image(dir / (stem + "2.dexc"), b);
    write_pgm(dir / (stem + "1.pgm"), a, pgm_bits);
    write_pgm(dir / (stem + "2.pgm"), b, pgm_bits);
}

ImagePair read_image_pair(const fs::path& dir, const std::string& stem)
{
    return ImagePair(load_image(dir / (stem + "1.dexc")), load_image(dir / (stem + "2.dexc")));
}

void write_scan(const fs::path& dir, const SinogramPair& m, const ScanMetadata& meta)
{
    save_sinogram(dir / "low.dexc", m.low);
    save_sinogram(dir / "high.dexc", m.high);
    write_metadata(dir / "metadata.txt", meta);
}

SinogramPair read_scan(const fs::path& dir, ScanMetadata& meta)
{
    meta = read_metadata(dir / "metadata.txt");
    SinogramPair m{load_sinogram(dir / "low.dexc"), load_sinogram(dir / "high.dexc")};
    const GeometryPair geo = meta.geometries();
    if (m.low.n_angles != geo.low.n_angles() || m.low.n_detectors != geo.low.n_detectors ||
        m.high.n_angles != geo.high.n_angles() || m.high.n_detectors != geo.high.n_detectors)
        throw std::runtime_error(dir.string() + ": sinogram shapes do not match metadata.txt");
    return m;
}

namespace {

void write_metrics_row(std::ostream& out, const std::string& method, double parameter, const MetricsReport& r)
{
    out << method << ',' << format_number(parameter) << ',';
    r.write_csv_row(out);
}

void write_sweep_csv(const fs::path& path, const std::vector<double>& candidates, const AlphaSelection& sel)
{
    auto out = detail::open_out(path);
    out << "parameter,e_mean\n" << std::setprecision(17);
    for (std::size_t i = 0; i < candidates.size(); ++i)
        out << format_number(candidates[i]) << ',' << sel.e_mean[i] << '\n';
}

/// Segments, scores and stores one reconstruction.
MetricsReport finish_method(const fs::path& dir, const ImagePair& recon, const ImagePair& truth, int pgm_bits)
{
    write_image_pair(dir, "material", recon, pgm_bits);
    const Evaluation e = evaluate(recon, truth);
    write_image_pair(dir, "segmentation", ImagePair(e.seg1.mask, e.seg2.mask), 8);
    e.metrics.write_csv(dir / "metrics.csv");
    return e.metrics;
}

} // namespace

RunStatus run_experiment(const ExperimentConfig& cfg, std::ostream& log, std::size_t workers)
{
    const fs::path root = cfg.output.directory;
    const int bits = cfg.output.pgm_bits;
    RunStatus status;
    std::mutex log_mutex;
    auto say = [&](const std::string& msg) {
        std::lock_guard lock(log_mutex);
        log << msg << '\n';
    };

    const ImagePair truth = generate(cfg.phantom);
    const std::size_t n = truth.size();
    write_image_pair(root / "phantom", "material", truth, 8);
    say("phantom " + to_string(cfg.phantom.kind) + " N=" + std::to_string(n));

    ScanMetadata meta;
    meta.n = n;
    meta.n_angles = cfg.geometry.n_angles;
    meta.protocol = cfg.geometry.protocol;
    meta.pixel_size = cfg.geometry.pixel_size;
    meta.coeffs = cfg.coeffs;
    meta.noise_level = cfg.simulation.noise_level;
    meta.rotation_deg = cfg.simulation.rotation_deg;
    meta.noise_seed = derive_seed(cfg.seed, 2);
    const GeometryPair geo = meta.geometries();
    const SinogramPair m =
        simulate_measurement(truth, cfg.coeffs, geo.low, geo.high, meta.noise_level, meta.rotation_deg, meta.noise_seed);
    write_scan(root / "sinogram", m, meta);
    say("simulated " + std::to_string(meta.n_angles) + " angles, protocol " + to_string(meta.protocol));

    DualEnergyProjectors proj(geo.low, geo.high);
    const auto op = proj.op(cfg.coeffs);
    IpmConfig ipm_cfg = cfg.ip.solver;
    ipm_cfg.seed = derive_seed(cfg.seed, 3);

    auto solve_ip = [&](RegWeights w, const fs::path& dir, bool& converged) {
        IpmResult r = ipm_solve(op, m, w, ipm_cfg);
        r.report.write_csv(dir / "solver_report.csv", cfg.output.record_timing);
        converged = r.report.converged;
        say("ip alpha=" + format_number(w.alpha) + " beta=" + format_number(w.beta) + ": " +
            std::to_string(r.report.iterations) + " IPM / " + std::to_string(r.report.total_pcg_iters) + " PCG" +
            (converged ? "" : " (not converged)"));
        return ImagePair(n, std::move(r.state.g));
    };
    auto solve_jtv = [&](const JtvConfig& jc, const fs::path& dir, bool& converged) {
        JtvResult r = jtv_solve(op, m, jc);
        r.report.write_csv(dir / "solver_report.csv");
        converged = !r.report.line_search_failed;
        say("jtv gamma=" + format_number(jc.gamma) + ": " + std::to_string(r.report.iterations) + " iterations" +
            (converged ? "" : " (line search failed)"));
        return std::move(r.g);
    };

    struct Selected {
        double value = 0.0;
        ImagePair g;
        bool converged = true;
    };

    // Candidate runs write into isolated directories and may run concurrently.
    // The selected candidate's reconstruction and solver report are reused as
    // the method's final result.
    auto sweep = [&](const std::string& method, const std::vector<double>& candidates, auto&& solve_one) {
        std::vector<char> converged(candidates.size(), 1);
        std::vector<ImagePair> recons(candidates.size());
        auto dir_for = [&](double value) {
            return root / method / "sweep" / ((method == "ip" ? "alpha_" : "gamma_") + format_number(value));
        };
        auto reconstruct = [&](double value) {
            const auto idx = static_cast<std::size_t>(
                std::find(candidates.begin(), candidates.end(), value) - candidates.begin());
            const fs::path dir = dir_for(value);
            bool ok = true;
            ImagePair g = solve_one(value, dir, ok);
            converged[idx] = ok;
            finish_method(dir, g, truth, bits);
            recons[idx] = g;
            return g;
        };
        const AlphaSelection sel = select_alpha(candidates, reconstruct, truth, workers);
        write_sweep_csv(root / method / "sweep.csv", candidates, sel);
        for (std::size_t i = 0; i < candidates.size(); ++i)
            if (!converged[i]) {
                status.converged = false;
                status.notes[method + "_sweep_" + format_number(candidates[i])] = "not converged";
            }
        say(method + " sweep selected " + format_number(sel.alpha));
        const auto best = static_cast<std::size_t>(
            std::find(candidates.begin(), candidates.end(), sel.alpha) - candidates.begin());
        fs::create_directories(root / method);
        fs::copy_file(dir_for(sel.alpha) / "solver_report.csv", root / method / "solver_report.csv",
                      fs::copy_options::overwrite_existing);
        return Selected{sel.alpha, std::move(recons[best]), converged[best] != 0};
    };

    std::ostringstream summary;
    summary << "method,parameter," << MetricsReport::csv_header << '\n';

    if (cfg.ip.enabled) {
        Selected sel{cfg.ip.weights.alpha, {}, true};
        RegWeights w = cfg.ip.weights;
        if (cfg.ip.sweep.empty()) {
            sel.g = solve_ip(w, root / "ip", sel.converged);
        } else {
            sel = sweep("ip", cfg.ip.sweep, [&](double a, const fs::path& dir, bool& ok) {
                return solve_ip(ip_weights_for(a), dir, ok);
            });
            w = ip_weights_for(sel.value);
        }
        if (!sel.converged) {
            status.converged = false;
            status.notes["ip"] = "not converged";
        }
        write_metrics_row(summary, "ip", w.alpha, finish_method(root / "ip", sel.g, truth, bits));
    }
    if (cfg.jtv.enabled) {
        Selected sel{cfg.jtv.solver.gamma, {}, true};
        if (cfg.jtv.sweep.empty()) {
            sel.g = solve_jtv(cfg.jtv.solver, root / "jtv", sel.converged);
        } else {
            sel = sweep("jtv", cfg.jtv.sweep, [&](double gamma, const fs::path& dir, bool& ok) {
                JtvConfig c = cfg.jtv.solver;
                c.gamma = gamma;
                return solve_jtv(c, dir, ok);
            });
        }
        if (!sel.converged) {
            status.converged = false;
            status.notes["jtv"] = "line search failed";
        }
        write_metrics_row(summary, "jtv", sel.value, finish_method(root / "jtv", sel.g, truth, bits));
    }
    {
        auto out = detail::open_out(root / "metrics.csv");
        out << summary.str();
    }

    nlohmann::ordered_json prov;
    prov["tool"] = "dexct";
    prov["version"] = DEXCT_VERSION;
    prov["config"] = {{"source", fs::path(cfg.source_name).filename().string()}, {"sha256", cfg.sha256}};
    prov["seeds"] = {{"master", cfg.seed},
                     {"phantom", cfg.phantom.seed},
                     {"noise", meta.noise_seed},
                     {"rho_sampling", ipm_cfg.seed}};
    prov["phantom"] = {{"kind", to_string(cfg.phantom.kind)}, {"size", n}};
    prov["status"] = {{"converged", status.converged}, {"notes", status.notes}};
    {
        auto out = detail::open_out(root / "provenance.json");
        out << prov.dump(2) << '\n';
    }
    return status;
}

void run_bench(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& log)
{
    csv << "N,dimension,ipm_iters,pcg_iters,seconds\n";
    for (std::size_t n : cfg.bench.sizes) {
        PhantomSpec spec = cfg.phantom;
        spec.size = n;
        const ImagePair truth = generate(spec);
        const GeometryPair geo = make_geometries(n, cfg.geometry.n_angles, cfg.geometry.protocol, cfg.geometry.pixel_size);
        const SinogramPair m = simulate_measurement(truth, cfg.coeffs, geo.low, geo.high, cfg.simulation.noise_level,
                                                    cfg.simulation.rotation_deg, derive_seed(cfg.seed, 2));
        IpmConfig ipm_cfg = cfg.ip.solver;
        ipm_cfg.seed = derive_seed(cfg.seed, 3);
        const IpmReconstruction r = ipm_solve(m, cfg.coeffs, cfg.bench.weights, geo.low, geo.high, ipm_cfg);
        csv << n << ',' << 2 * n * n << ',' << r.report.iterations << ',' << r.report.total_pcg_iters << ','
            << std::fixed << std::setprecision(3) << r.report.seconds << std::defaultfloat << '\n';
        csv.flush();
        log << "bench N=" << n << ": " << r.report.iterations << " IPM / " << r.report.total_pcg_iters << " PCG, "
            << r.report.seconds << " s" << (r.report.converged ? "" : " (not converged)") << '\n';
    }
}

} // namespace dexct::cli
