#pragma once

// Scan protocols and method-level helpers shared by the experiment runner.

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dexct/eval.hpp"
#include "dexct/geometry.hpp"
#include "dexct/ipm.hpp"
#include "dexct/jtv.hpp"
#include "dexct/model.hpp"

namespace dexct {

enum class ScanProtocol {
    /// Both energies measured at every angle.
    SAME_OPERATOR,
    /// Energies alternate between consecutive angles.
    ALTERNATING_ENERGY,
};

enum class Method { IP, JTV };

namespace detail {

inline std::string normalise_name(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char ch) { return ch == '-' ? '_' : static_cast<char>(std::tolower(ch)); });
    return s;
}

} // namespace detail

inline std::string to_string(ScanProtocol p)
{
    return p == ScanProtocol::SAME_OPERATOR ? "same_operator" : "alternating_energy";
}

inline ScanProtocol parse_scan_protocol(const std::string& name)
{
    const std::string s = detail::normalise_name(name);
    if (s == "same_operator")
        return ScanProtocol::SAME_OPERATOR;
    if (s == "alternating_energy")
        return ScanProtocol::ALTERNATING_ENERGY;
    throw std::invalid_argument("unknown protocol '" + name + "' (expected same_operator or alternating_energy)");
}

inline std::string to_string(Method m) { return m == Method::IP ? "ip" : "jtv"; }

inline Method parse_method(const std::string& name)
{
    const std::string s = detail::normalise_name(name);
    if (s == "ip")
        return Method::IP;
    if (s == "jtv")
        return Method::JTV;
    throw std::invalid_argument("unknown method '" + name + "' (expected ip or jtv)");
}

struct GeometryPair {
    Geometry low;
    Geometry high;
};

/// n_angles equally spaced angles over [0, 180). For the alternating protocol
/// the low energy takes the even-numbered angles and the high energy the odd ones.
inline GeometryPair make_geometries(std::size_t n, std::size_t n_angles, ScanProtocol protocol,
                                    double pixel_size = 1.0)
{
    if (protocol == ScanProtocol::SAME_OPERATOR) {
        Geometry g = Geometry::parallel_beam(n, n_angles, pixel_size);
        return {g, g};
    }
    if (n_angles < 2)
        throw std::invalid_argument("alternating protocol needs at least 2 angles");
    const double step = 180.0 / static_cast<double>(n_angles);
    return {Geometry::parallel_beam(n, (n_angles + 1) / 2, pixel_size, 0.0, 2.0 * step),
            Geometry::parallel_beam(n, n_angles / 2, pixel_size, step, 2.0 * step)};
}

/// IP weights used during parameter selection: beta = 0.8 alpha.
inline RegWeights ip_weights_for(double alpha) { return {alpha, 0.8 * alpha}; }

/// Chooses the regularisation parameter with the smallest E_mean. For IP the
/// candidate is alpha with beta = 0.8 alpha; for JTV it is gamma.
inline AlphaSelection select_alpha(const SinogramPair& m, const ImagePair& truth, const AttenuationCoeffs& c,
                                   const GeometryPair& geo, const std::vector<double>& alphas, Method method,
                                   const IpmConfig& ipm_cfg = {}, const JtvConfig& jtv_cfg = {},
                                   std::size_t workers = 1)
{
    DualEnergyProjectors proj(geo.low, geo.high);
    const auto op = proj.op(c);
    auto reconstruct = [&](double alpha) {
        if (method == Method::IP) {
            IpmConfig cfg = ipm_cfg;
            cfg.on_iterate = nullptr;
            return ImagePair(geo.low.n_pixels, std::move(ipm_solve(op, m, ip_weights_for(alpha), cfg).state.g));
        }
        JtvConfig cfg = jtv_cfg;
        cfg.gamma = alpha;
        return jtv_solve(op, m, cfg).g;
    };
    return select_alpha(alphas, reconstruct, truth, workers);
}

} // namespace dexct
