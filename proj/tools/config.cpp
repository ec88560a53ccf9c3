#include "config.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

namespace dexct::cli {

namespace {

std::string location(const std::string& source, const YAML::Mark& mark)
{
    if (mark.is_null())
        return source;
    return source + ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1);
}

/// A YAML mapping that remembers which keys were read, so leftovers can be
/// reported as typos.
class Section {
public:
    Section(YAML::Node node, std::string path, const std::string& source)
        : node_(std::move(node)), path_(std::move(path)), source_(source)
    {
        if (node_ && !node_.IsNull() && !node_.IsMap())
            fail(node_.Mark(), "expected a mapping");
    }

    YAML::Mark mark() const { return node_ ? node_.Mark() : YAML::Mark::null_mark(); }

    bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

    template <class T>
    void get(const std::string& key, T& out)
    {
        used_.insert(key);
        if (!has(key))
            return;
        const YAML::Node v = node_[key];
        try {
            out = v.as<T>();
        } catch (const YAML::Exception&) {
            fail(v.Mark(), key, "cannot read value '" + scalar(v) + "'");
        }
    }

    /// Reads a string and converts it with parse(), reporting conversion errors at the value.
    template <class T, class Parse>
    void get_parsed(const std::string& key, T& out, Parse&& parse)
    {
        std::string text;
        get(key, text);
        if (!has(key))
            return;
        try {
            out = parse(text);
        } catch (const std::exception& e) {
            fail(node_[key].Mark(), key, e.what());
        }
    }

    Section child(const std::string& key)
    {
        used_.insert(key);
        return Section(has(key) ? node_[key] : YAML::Node(), join(key), source_);
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const
    {
        fail(has(key) ? node_[key].Mark() : node_.Mark(), key, msg);
    }

    [[noreturn]] void fail(const YAML::Mark& mark, const std::string& msg) const
    {
        throw ConfigError(location(source_, mark) + ": " + (path_.empty() ? "<root>" : path_) + ": " + msg);
    }

    [[noreturn]] void fail(const YAML::Mark& mark, const std::string& key, const std::string& msg) const
    {
        throw ConfigError(location(source_, mark) + ": " + join(key) + ": " + msg);
    }

    /// Rejects keys that were never read.
    void finish() const
    {
        if (!node_ || !node_.IsMap())
            return;
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!used_.count(key))
                throw ConfigError(location(source_, kv.first.Mark()) + ": " + join(key) + ": unknown key");
        }
    }

private:
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    static std::string scalar(const YAML::Node& v) { return v.IsScalar() ? v.Scalar() : "<non-scalar>"; }

    YAML::Node node_;
    std::string path_;
    const std::string& source_;
    std::set<std::string> used_;
};

void require(bool ok, Section& s, const std::string& key, const std::string& msg)
{
    if (!ok)
        s.fail(key, msg);
}

void read_ipm(Section& s, IpmConfig& c)
{
    s.get("tol", c.tol);
    s.get("max_iters", c.max_iters);
    s.get("n_correctors", c.n_correctors);
    s.get("neighbourhood_gamma", c.neighbourhood_gamma);
    s.get("pcg_tol", c.pcg_tol);
    s.get("pcg_max_iters", c.pcg_max_iters);
    s.get("step_fraction", c.step_fraction);
    s.get("sigma_power", c.sigma_power);
    s.get("sigma_min", c.sigma_min);
    s.get("sigma_max", c.sigma_max);
    s.get("corrector_step_increase", c.corrector_step_increase);
    s.get("corrector_min_gain", c.corrector_min_gain);
    s.get("corrector_step_threshold", c.corrector_step_threshold);
    s.get("early_termination", c.early_termination);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        s.fail(s.mark(), e.what());
    }
}

} // namespace

std::string sha256_hex(const std::string& data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 computation failed");
    std::ostringstream out;
    out << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i)
        out << std::setw(2) << static_cast<unsigned>(digest[i]);
    return out.str();
}

ExperimentConfig parse_config(const std::string& text, const std::string& source_name,
                              const std::filesystem::path& base_dir)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(location(source_name, e.mark) + ": syntax error: " + e.msg);
    }
    ExperimentConfig cfg;
    cfg.sha256 = sha256_hex(text);
    cfg.source_name = source_name;
    auto resolve = [&](const std::filesystem::path& p) { return p.is_absolute() || base_dir.empty() ? p : base_dir / p; };

    Section top(root, "", source_name);
    top.get("seed", cfg.seed);

    Section ph = top.child("phantom");
    ph.get_parsed("kind", cfg.phantom.kind, parse_phantom_kind);
    // Imported phantoms take their size from the files unless one is given.
    if (cfg.phantom.kind == PhantomKind::FROM_FILES)
        cfg.phantom.size = 0;
    ph.get("size", cfg.phantom.size);
    require(cfg.phantom.size >= 8 || (cfg.phantom.kind == PhantomKind::FROM_FILES && cfg.phantom.size == 0), ph,
            "size", "must be at least 8");
    std::string m1, m2;
    ph.get("material1", m1);
    ph.get("material2", m2);
    if (cfg.phantom.kind == PhantomKind::FROM_FILES) {
        require(!m1.empty() && !m2.empty(), ph, "kind", "from_files needs material1 and material2 paths");
        cfg.phantom.material1_path = resolve(m1);
        cfg.phantom.material2_path = resolve(m2);
    }
    // Procedural phantoms take a sub-seed unless one is given explicitly.
    cfg.phantom.seed = derive_seed(cfg.seed, 1);
    ph.get("seed", cfg.phantom.seed);
    ph.finish();

    Section geo = top.child("geometry");
    geo.get("angles", cfg.geometry.n_angles);
    require(cfg.geometry.n_angles >= 1, geo, "angles", "must be at least 1");
    geo.get_parsed("protocol", cfg.geometry.protocol, parse_scan_protocol);
    geo.get("pixel_size", cfg.geometry.pixel_size);
    require(cfg.geometry.pixel_size > 0.0, geo, "pixel_size", "must be positive");
    geo.finish();

    Section co = top.child("coefficients");
    co.get("c11", cfg.coeffs.c11);
    co.get("c12", cfg.coeffs.c12);
    co.get("c21", cfg.coeffs.c21);
    co.get("c22", cfg.coeffs.c22);
    try {
        cfg.coeffs.validate();
    } catch (const std::invalid_argument& e) {
        co.fail(co.mark(), e.what());
    }
    co.finish();

    Section sim = top.child("simulation");
    sim.get("noise_level", cfg.simulation.noise_level);
    require(cfg.simulation.noise_level >= 0.0, sim, "noise_level", "must be non-negative");
    sim.get("rotation_deg", cfg.simulation.rotation_deg);
    sim.finish();

    Section methods = top.child("methods");
    Section ip = methods.child("ip");
    cfg.ip.enabled = methods.has("ip");
    ip.get("enabled", cfg.ip.enabled);
    ip.get("alpha", cfg.ip.weights.alpha);
    ip.get("beta", cfg.ip.weights.beta);
    require(cfg.ip.weights.beta >= 0.0, ip, "beta", "must be non-negative");
    require(cfg.ip.weights.alpha >= cfg.ip.weights.beta, ip, "alpha", "alpha must be at least beta");
    ip.get("sweep", cfg.ip.sweep);
    for (double a : cfg.ip.sweep)
        require(a > 0.0, ip, "sweep", "candidates must be positive");
    Section ipm = ip.child("solver");
    read_ipm(ipm, cfg.ip.solver);
    ipm.finish();
    ip.finish();

    Section jtv = methods.child("jtv");
    cfg.jtv.enabled = methods.has("jtv");
    jtv.get("enabled", cfg.jtv.enabled);
    jtv.get("gamma", cfg.jtv.solver.gamma);
    jtv.get("kappa", cfg.jtv.solver.kappa);
    jtv.get("iterations", cfg.jtv.solver.n_iters);
    jtv.get("armijo_c", cfg.jtv.solver.armijo_c);
    jtv.get("backtrack_factor", cfg.jtv.solver.backtrack_factor);
    jtv.get("max_backtracks", cfg.jtv.solver.max_backtracks);
    jtv.get("sweep", cfg.jtv.sweep);
    for (double g : cfg.jtv.sweep)
        require(g > 0.0, jtv, "sweep", "candidates must be positive");
    try {
        cfg.jtv.solver.validate();
    } catch (const std::invalid_argument& e) {
        jtv.fail(jtv.mark(), e.what());
    }
    jtv.finish();
    methods.finish();

    Section out = top.child("output");
    std::string dir;
    out.get("directory", dir);
    if (!dir.empty())
        cfg.output.directory = resolve(dir);
    out.get("record_timing", cfg.output.record_timing);
    out.get("pgm_bits", cfg.output.pgm_bits);
    require(cfg.output.pgm_bits == 8 || cfg.output.pgm_bits == 16, out, "pgm_bits", "must be 8 or 16");
    out.finish();

    Section bench = top.child("bench");
    bench.get("sizes", cfg.bench.sizes);
    for (std::size_t n : cfg.bench.sizes)
        require(n >= 8, bench, "sizes", "sizes must be at least 8");
    bench.get("alpha", cfg.bench.weights.alpha);
    bench.get("beta", cfg.bench.weights.beta);
    require(cfg.bench.weights.alpha >= cfg.bench.weights.beta && cfg.bench.weights.beta >= 0.0, bench, "alpha",
            "need alpha >= beta >= 0");
    bench.finish();

    top.finish();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError(path.string() + ": cannot open configuration file");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string(), path.parent_path());
}

} // namespace dexct::cli
