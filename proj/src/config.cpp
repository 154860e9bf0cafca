#include "multcorr/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "multcorr/errors.hpp"
#include "multcorr/multfunc.hpp"

namespace multcorr {

namespace {

const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> m = {
        {"output", {"name"}},
        {"multfunc", {"functions"}},
        {"linsys", {"forms", "allow_proportional", "body", "interval", "T"}},
        {"wtrick", {"w_of_x", "q_star", "C", "B1", "B2", "A"}},
        {"majorant", {"gamma", "C1"}},
        {"localdensity", {"A_max", "P_max", "P_max_sensitivity"}},
        {"charsum", {"q0", "W_tilde", "A", "theta", "y_max", "q0_max"}},
        {"params", {}},  // free-form
    };
    return m;
}

const std::set<std::string> kScalarTop = {"kind", "seed", "threads"};

template <class T>
T scalar_as(const ExperimentConfig& c, const YAML::Node& n, const std::string& field) {
    if (!n.IsScalar()) throw ConfigError(c.where(n) + ": " + field + " must be a scalar");
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(c.where(n) + ": " + field + " has the wrong type ('" + n.Scalar() + "')");
    }
}

Rational rational_at(const ExperimentConfig& c, const YAML::Node& n, const std::string& field) {
    if (!n.IsScalar()) throw ConfigError(c.where(n) + ": " + field + " must be a number");
    try {
        return parse_rational(n.Scalar());
    } catch (const std::exception& e) {
        throw ConfigError(c.where(n) + ": " + field + ": " + e.what());
    }
}

YAML::Node child(const YAML::Node& root, const std::string& section, const std::string& key) {
    YAML::Node s = root[section];
    if (!s || !s.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
    return s[key];
}

void parse_into(ExperimentConfig& c) {
    const YAML::Node& root = c.root;
    if (!root.IsMap()) throw ConfigError(c.path + ": top level must be a mapping");
    for (auto it : root) {
        const auto key = it.first.as<std::string>();
        if (kScalarTop.count(key) || key == "assert") continue;
        auto sec = allowed_keys().find(key);
        if (sec == allowed_keys().end()) throw ConfigError(c.where(it.first) + ": unknown section '" + key + "'");
        if (!it.second.IsMap()) throw ConfigError(c.where(it.second) + ": section '" + key + "' must be a mapping");
        if (key == "params") continue;
        for (auto kv : it.second) {
            const auto k = kv.first.as<std::string>();
            if (!sec->second.count(k))
                throw ConfigError(c.where(kv.first) + ": unknown field '" + key + "." + k + "'");
        }
    }

    if (!root["kind"]) throw ConfigError(c.path + ": missing 'kind'");
    c.kind = scalar_as<std::string>(c, root["kind"], "kind");
    const auto kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end())
        throw ConfigError(c.where(root["kind"]) + ": unknown kind '" + c.kind + "'");
    if (root["seed"]) c.seed = scalar_as<uint64_t>(c, root["seed"], "seed");
    if (root["threads"]) {
        c.threads = scalar_as<unsigned>(c, root["threads"], "threads");
        if (c.threads < 1) throw ConfigError(c.where(root["threads"]) + ": threads must be >= 1");
    }
    c.name = std::filesystem::path(c.path).stem().string();
    if (auto n = child(root, "output", "name")) c.name = scalar_as<std::string>(c, n, "output.name");

    // multfunc
    if (auto fn = child(root, "multfunc", "functions")) {
        if (!fn.IsSequence()) throw ConfigError(c.where(fn) + ": multfunc.functions must be a list");
        for (auto f : fn) {
            auto spec = scalar_as<std::string>(c, f, "multfunc.functions[]");
            try {
                (void)make_function(spec);
            } catch (const std::exception& e) {
                throw ConfigError(c.where(f) + ": multfunc.functions: " + e.what());
            }
            c.functions.push_back(spec);
        }
    }

    // linsys
    size_t s = 0;
    if (auto forms = child(root, "linsys", "forms")) {
        if (!forms.IsSequence() || forms.size() == 0)
            throw ConfigError(c.where(forms) + ": linsys.forms must be a nonempty list of rows");
        std::vector<LinearForm> fs;
        for (auto row : forms) {
            if (!row.IsSequence() || row.size() < 2)
                throw ConfigError(c.where(row) + ": a form row is [coefficients..., constant]");
            LinearForm f;
            for (size_t k = 0; k + 1 < row.size(); ++k) f.coeffs.push_back(scalar_as<int64_t>(c, row[k], "coefficient"));
            f.constant = scalar_as<int64_t>(c, row[row.size() - 1], "constant");
            if (s && f.coeffs.size() != s) throw ConfigError(c.where(row) + ": form rows differ in length");
            s = f.coeffs.size();
            fs.push_back(std::move(f));
        }
        bool prop = false;
        if (auto p = child(root, "linsys", "allow_proportional")) prop = scalar_as<bool>(c, p, "allow_proportional");
        try {
            c.system.emplace(std::move(fs), prop);
        } catch (const std::exception& e) {
            throw ConfigError(c.where(forms) + ": linsys.forms: " + e.what());
        }
        if (!c.functions.empty() && c.functions.size() != c.system->r()) {
            if (c.functions.size() == 1)
                c.functions.assign(c.system->r(), c.functions[0]);
            else
                throw ConfigError(c.where(child(root, "multfunc", "functions")) + ": need one function per form (" +
                                  std::to_string(c.system->r()) + ")");
        }
    }
    auto body = child(root, "linsys", "body");
    auto interval = child(root, "linsys", "interval");
    if (body && interval) throw ConfigError(c.where(body) + ": give either linsys.body or linsys.interval");
    if (body || interval) {
        if (!c.system) throw ConfigError(c.where(body ? body : interval) + ": a body needs linsys.forms");
        try {
            if (interval) {
                if (s != 1) throw ConfigError(c.where(interval) + ": linsys.interval needs one variable");
                if (!interval.IsSequence() || interval.size() != 2)
                    throw ConfigError(c.where(interval) + ": linsys.interval is [lo, hi]");
                c.body.emplace(ConvexBody::interval(rational_at(c, interval[0], "interval.lo"),
                                                    rational_at(c, interval[1], "interval.hi")));
            } else {
                if (!body.IsSequence()) throw ConfigError(c.where(body) + ": linsys.body must be a list of rows");
                std::vector<Halfspace> hs;
                for (auto row : body) {
                    if (!row.IsSequence() || (row.size() != s + 1 && row.size() != s + 2))
                        throw ConfigError(c.where(row) + ": a body row is [normal (" + std::to_string(s) +
                                          " entries), offset, optional slack]");
                    Halfspace h;
                    for (size_t k = 0; k < s; ++k) h.normal.push_back(rational_at(c, row[k], "normal"));
                    h.offset = rational_at(c, row[s], "offset");
                    if (row.size() == s + 2) h.slack = rational_at(c, row[s + 1], "slack");
                    hs.push_back(std::move(h));
                }
                c.body.emplace(s, std::move(hs));
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(c.where(body ? body : interval) + ": linsys body: " + e.what());
        }
    }
    if (auto T = child(root, "linsys", "T")) {
        if (!T.IsSequence() || T.size() == 0) throw ConfigError(c.where(T) + ": linsys.T must be a nonempty list");
        for (auto t : T) {
            auto v = scalar_as<uint64_t>(c, t, "linsys.T[]");
            if (v < 1) throw ConfigError(c.where(t) + ": T must be >= 1");
            if (!c.T_grid.empty() && v <= c.T_grid.back())
                throw ConfigError(c.where(t) + ": linsys.T must be strictly ascending");
            c.T_grid.push_back(v);
        }
    }

    // wtrick
    if (auto n = child(root, "wtrick", "w_of_x")) c.w.w_of_x = scalar_as<double>(c, n, "wtrick.w_of_x");
    if (auto n = child(root, "wtrick", "q_star")) c.w.q_star = scalar_as<uint64_t>(c, n, "wtrick.q_star");
    if (auto n = child(root, "wtrick", "C")) c.w.C = scalar_as<double>(c, n, "wtrick.C");
    if (auto n = child(root, "wtrick", "B1")) c.w.B1 = scalar_as<double>(c, n, "wtrick.B1");
    if (auto n = child(root, "wtrick", "B2")) c.w.B2 = scalar_as<double>(c, n, "wtrick.B2");
    if (auto n = child(root, "wtrick", "A")) {
        if (n.IsSequence())
            for (auto a : n) c.w_A.push_back(scalar_as<int64_t>(c, a, "wtrick.A[]"));
        else
            c.w_A.push_back(scalar_as<int64_t>(c, n, "wtrick.A"));
        if (c.system && c.w_A.size() == 1) c.w_A.assign(c.system->r(), c.w_A[0]);
        if (c.system && c.w_A.size() != c.system->r())
            throw ConfigError(c.where(n) + ": need one wtrick.A per form");
    }

    // majorant
    if (auto n = child(root, "majorant", "gamma")) {
        c.gamma = scalar_as<double>(c, n, "majorant.gamma");
        if (!(c.gamma > 0 && c.gamma < 0.5)) throw ConfigError(c.where(n) + ": majorant.gamma must lie in (0, 1/2)");
    }
    if (auto n = child(root, "majorant", "C1")) {
        c.C1 = scalar_as<double>(c, n, "majorant.C1");
        if (!(c.C1 > 0)) throw ConfigError(c.where(n) + ": majorant.C1 must be positive");
    }

    // localdensity
    if (auto n = child(root, "localdensity", "A_max")) {
        c.A_max = scalar_as<int>(c, n, "localdensity.A_max");
        if (c.A_max < 1) throw ConfigError(c.where(n) + ": localdensity.A_max must be >= 1");
    }
    if (auto n = child(root, "localdensity", "P_max")) {
        if (!(n.IsScalar() && n.Scalar() == "T")) c.P_max = scalar_as<uint64_t>(c, n, "localdensity.P_max");
    }

    // assertions
    if (auto a = root["assert"]) {
        if (!a.IsSequence()) throw ConfigError(c.where(a) + ": assert must be a list");
        for (auto item : a) {
            if (!item.IsMap() || !item["metric"])
                throw ConfigError(c.where(item) + ": an assertion is {metric: name, min|max|equals: value}");
            AssertionSpec s;
            s.where = c.where(item);
            for (auto kv : item) {
                const auto k = kv.first.as<std::string>();
                if (k == "metric")
                    s.metric = scalar_as<std::string>(c, kv.second, "assert.metric");
                else if (k == "min")
                    s.min = scalar_as<double>(c, kv.second, "assert.min");
                else if (k == "max")
                    s.max = scalar_as<double>(c, kv.second, "assert.max");
                else if (k == "equals")
                    s.equals = scalar_as<double>(c, kv.second, "assert.equals");
                else
                    throw ConfigError(c.where(kv.first) + ": unknown assertion field '" + k + "'");
            }
            if (!s.min && !s.max && !s.equals)
                throw ConfigError(s.where + ": assertion on '" + s.metric + "' has no bound");
            c.assertions.push_back(std::move(s));
        }
    }
}

}  // namespace

std::vector<std::string> experiment_kinds() {
    return {"sieve",          "correlate",       "predict-corollary", "predict-theorem", "partition",
            "majorant-scan",  "linear-forms-ratio", "char-identity", "stability-scan", "sato-tate",
            "alpha-check",    "beta-closed-form", "tau",             "exceptional-density", "average-order",
            "major-arc-probe"};
}

std::string ExperimentConfig::where(const YAML::Node& n) const {
    if (!n || n.Mark().is_null()) return path;
    return path + ":" + std::to_string(n.Mark().line + 1);
}

bool ExperimentConfig::has(const std::string& section, const std::string& key) const {
    return bool(child(root, section, key));
}

double ExperimentConfig::real(const std::string& section, const std::string& key, double def) const {
    auto n = child(root, section, key);
    return n ? scalar_as<double>(*this, n, section + "." + key) : def;
}

int64_t ExperimentConfig::integer(const std::string& section, const std::string& key, int64_t def) const {
    auto n = child(root, section, key);
    return n ? scalar_as<int64_t>(*this, n, section + "." + key) : def;
}

std::vector<int64_t> ExperimentConfig::integers(const std::string& section, const std::string& key,
                                                std::vector<int64_t> def) const {
    auto n = child(root, section, key);
    if (!n) return def;
    std::vector<int64_t> out;
    if (n.IsSequence())
        for (auto v : n) out.push_back(scalar_as<int64_t>(*this, v, section + "." + key + "[]"));
    else
        out.push_back(scalar_as<int64_t>(*this, n, section + "." + key));
    return out;
}

std::vector<std::string> ExperimentConfig::strings(const std::string& section, const std::string& key,
                                                   std::vector<std::string> def) const {
    auto n = child(root, section, key);
    if (!n) return def;
    std::vector<std::string> out;
    if (n.IsSequence())
        for (auto v : n) out.push_back(scalar_as<std::string>(*this, v, section + "." + key + "[]"));
    else
        out.push_back(scalar_as<std::string>(*this, n, section + "." + key));
    return out;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr)) throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source_name) {
    ExperimentConfig c;
    c.path = source_name;
    c.sha256 = sha256_hex(text);
    try {
        c.root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(source_name + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    parse_into(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace multcorr
