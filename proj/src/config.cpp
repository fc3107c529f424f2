#include "twr/harness.hpp"

#include "twr/rng.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace twr {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string where(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

double to_double(const std::string& text, const std::string& ctx) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(v))
        throw ConfigError(ctx + ": expected a number, got '" + text + "'");
    return v;
}

long long to_int(const std::string& text, const std::string& ctx) {
    const std::string t = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError(ctx + ": expected an integer, got '" + text + "'");
    return v;
}

bool to_bool(const std::string& text, const std::string& ctx) {
    const std::string t = lower(trim(text));
    if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
    if (t == "false" || t == "no" || t == "off" || t == "0") return false;
    throw ConfigError(ctx + ": expected a boolean, got '" + text + "'");
}

std::vector<double> to_list(const std::string& text, const std::string& ctx) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(item, ctx));
    if (out.empty()) throw ConfigError(ctx + ": empty list");
    return out;
}

bool axis_from_key(const std::string& key, AxisField& f) {
    static const std::pair<const char*, AxisField> table[] = {
        {"p1max", AxisField::P1max}, {"p2max", AxisField::P2max}, {"prmax", AxisField::Prmax},
        {"n1", AxisField::N1},       {"n2", AxisField::N2},       {"nr", AxisField::Nr},
        {"v1", AxisField::V1},       {"v2", AxisField::V2},
    };
    for (const auto& [k, v] : table)
        if (key == k) {
            f = v;
            return true;
        }
    return false;
}

bool is_dimension(AxisField f) { return f == AxisField::N1 || f == AxisField::N2 || f == AxisField::Nr; }

int to_dim(long long v, const std::string& ctx) {
    if (v < 1 || v > 64) throw ConfigError(ctx + ": dimension must be in [1, 64]");
    return static_cast<int>(v);
}

}  // namespace

const char* axis_key(AxisField f) {
    switch (f) {
        case AxisField::P1max: return "P1max";
        case AxisField::P2max: return "P2max";
        case AxisField::Prmax: return "Prmax";
        case AxisField::N1: return "n1";
        case AxisField::N2: return "n2";
        case AxisField::Nr: return "nr";
        case AxisField::V1: return "v1";
        case AxisField::V2: return "v2";
    }
    return "?";
}

std::uint64_t trial_seed(std::uint64_t master, int trial) {
    return mix_seed(master, static_cast<std::uint64_t>(trial));
}

NetOptions RunConfig::options() const {
    NetOptions o;
    o.eps = eps;
    o.max_iters = max_iters;
    o.allow_one_shot = one_shot;
    return o;
}

ChannelSpec RunConfig::channel_spec(int trial) const {
    ChannelSpec s;
    s.n1 = n1;
    s.n2 = n2;
    s.nr = nr;
    s.v1 = v1;
    s.v2 = v2;
    s.reciprocal = reciprocal;
    s.identical_sources = identical_sources;
    s.sigma2_r = sigma2_r;
    s.sigma2_1 = sigma2_1;
    s.sigma2_2 = sigma2_2;
    s.seed = trial_seed(seed, trial);
    return s;
}

void RunConfig::validate() const {
    if (n1 < 1 || n2 < 1 || nr < 1) throw ConfigError("dimensions must be positive");
    if (p1max < 0.0 || p2max < 0.0 || prmax < 0.0) throw ConfigError("power limits must be >= 0");
    if (!(v1 > 0.0) || !(v2 > 0.0)) throw ConfigError("variances must be positive");
    if (!(sigma2_r > 0.0) || !(sigma2_1 > 0.0) || !(sigma2_2 > 0.0)) throw ConfigError("noise powers must be positive");
    if (identical_sources && n1 != n2) throw ConfigError("identical_sources requires n1 == n2");
    if (trials < 0) throw ConfigError("trials must be >= 0");
    if (!(eps > 0.0) || max_iters < 1) throw ConfigError("eps and max_iters must be positive");
    if (power_lo < 0.0 || power_hi < power_lo) throw ConfigError("need 0 <= power_lo <= power_hi");
    if (oracle_steps < 2) throw ConfigError("oracle_steps must be at least 2");
    if (!(rate_tol > 0.0) || !(power_tol > 0.0)) throw ConfigError("oracle tolerances must be positive");
    std::set<AxisField> seen;
    for (const SweepAxis& a : axes) {
        if (!seen.insert(a.field).second) throw ConfigError(std::string("duplicate sweep axis ") + axis_key(a.field));
        if (a.values.empty()) throw ConfigError(std::string("empty sweep axis ") + axis_key(a.field));
        for (double v : a.values) {
            if (is_dimension(a.field) && (v < 1.0 || v != std::floor(v)))
                throw ConfigError(std::string("sweep axis ") + axis_key(a.field) + " needs positive integers");
            if (!is_dimension(a.field) && v < 0.0)
                throw ConfigError(std::string("sweep axis ") + axis_key(a.field) + " needs values >= 0");
            if ((a.field == AxisField::V1 || a.field == AxisField::V2) && !(v > 0.0))
                throw ConfigError("variance axes need positive values");
        }
        if (zip && a.values.size() != axes.front().values.size())
            throw ConfigError("zip mode needs sweep axes of equal length");
    }
}

RunConfig parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }

    RunConfig c;
    for (const auto& [raw_section, body] : tree) {
        const std::string section = lower(raw_section);
        if (!body.data().empty()) throw ConfigError("key '" + raw_section + "' outside a section");
        for (const auto& [raw_key, node] : body) {
            const std::string key = lower(raw_key);
            const std::string& v = node.data();
            const std::string ctx = where(section, raw_key);
            if (section == "system") {
                if (key == "n1") c.n1 = to_dim(to_int(v, ctx), ctx);
                else if (key == "n2") c.n2 = to_dim(to_int(v, ctx), ctx);
                else if (key == "nr") c.nr = to_dim(to_int(v, ctx), ctx);
                else if (key == "v1") c.v1 = to_double(v, ctx);
                else if (key == "v2") c.v2 = to_double(v, ctx);
                else if (key == "reciprocal") c.reciprocal = to_bool(v, ctx);
                else if (key == "identical_sources") c.identical_sources = to_bool(v, ctx);
                else if (key == "sigma2_r") c.sigma2_r = to_double(v, ctx);
                else if (key == "sigma2_1") c.sigma2_1 = to_double(v, ctx);
                else if (key == "sigma2_2") c.sigma2_2 = to_double(v, ctx);
                else throw ConfigError("unknown key " + ctx);
            } else if (section == "limits") {
                if (key == "p1max") c.p1max = to_double(v, ctx);
                else if (key == "p2max") c.p2max = to_double(v, ctx);
                else if (key == "prmax") c.prmax = to_double(v, ctx);
                else throw ConfigError("unknown key " + ctx);
            } else if (section == "run") {
                if (key == "seed") {
                    const long long s = to_int(v, ctx);
                    if (s < 0) throw ConfigError(ctx + ": seed must be >= 0");
                    c.seed = static_cast<std::uint64_t>(s);
                } else if (key == "trials") c.trials = static_cast<int>(to_int(v, ctx));
                else if (key == "eps") c.eps = to_double(v, ctx);
                else if (key == "max_iters") c.max_iters = static_cast<int>(to_int(v, ctx));
                else if (key == "one_shot") c.one_shot = to_bool(v, ctx);
                else if (key == "random_limits") c.random_limits = to_bool(v, ctx);
                else if (key == "power_lo") c.power_lo = to_double(v, ctx);
                else if (key == "power_hi") c.power_hi = to_double(v, ctx);
                else if (key == "oracle_steps") c.oracle_steps = static_cast<int>(to_int(v, ctx));
                else if (key == "rate_tol") c.rate_tol = to_double(v, ctx);
                else if (key == "power_tol") c.power_tol = to_double(v, ctx);
                else throw ConfigError("unknown key " + ctx);
            } else if (section == "sweep") {
                AxisField f;
                if (key == "mode") {
                    const std::string m = lower(trim(v));
                    if (m != "grid" && m != "zip") throw ConfigError(ctx + ": mode must be grid or zip");
                    c.zip = m == "zip";
                } else if (axis_from_key(key, f)) {
                    c.axes.push_back({f, to_list(v, ctx)});
                } else {
                    throw ConfigError("unknown key " + ctx);
                }
            } else {
                throw ConfigError("unknown section [" + raw_section + "]");
            }
        }
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in);
}

}  // namespace twr
