// SPDX-License-Identifier: MIT
#include "tightmech/io.hpp"

#include "tightmech/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tightmech {

using nlohmann::json;

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

double number_field(const json& obj, const std::string& key, const std::string& where, bool required = true,
                    double fallback = 0.0) {
    if (!obj.contains(key)) {
        if (required) throw InputError(where + ": missing field \"" + key + "\"");
        return fallback;
    }
    const json& v = obj.at(key);
    if (!v.is_number()) throw InputError(where + ": field \"" + key + "\" must be a number");
    return v.get<double>();
}

std::vector<double> array_field(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_array())
        throw InputError(where + ": field \"" + key + "\" must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : obj.at(key)) {
        if (!v.is_number()) throw InputError(where + ": field \"" + key + "\" must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

CostFunction parse_cost(const json& j, const std::string& where) {
    if (!j.is_object()) throw InputError(where + ": must be an object with \"family\" and \"params\"");
    if (!j.contains("family") || !j.at("family").is_string()) throw InputError(where + ": missing string field \"family\"");
    const std::string family = j.at("family").get<std::string>();
    const json params = j.contains("params") ? j.at("params") : json::object();
    if (!params.is_object()) throw InputError(where + ".params: must be an object");
    const std::string pw = where + ".params";
    try {
        if (family == "power")
            return CostFunction::power(number_field(params, "p", pw), number_field(params, "scale", pw, false, 1.0));
        if (family == "exp-normalized") return CostFunction::exp_normalized(number_field(params, "scale", pw, false, 1.0));
        if (family == "user-tabulated") {
            auto c = CostFunction::tabulated(array_field(params, "nodes", pw), array_field(params, "values", pw));
            const double scale = number_field(params, "scale", pw, false, 1.0);
            return scale == 1.0 ? c : c.scaled(scale);
        }
    } catch (const DomainError& e) {
        throw InputError(where + ": " + e.what());
    }
    throw InputError(where + ": unknown cost family \"" + family + "\" (power, exp-normalized, user-tabulated)");
}

json cost_to_json(const CostFunction& c) {
    json params = json::object();
    switch (c.family()) {
        case CostFamily::Power:
            params["p"] = c.params()[0];
            params["scale"] = c.params()[1];
            break;
        case CostFamily::ExpNormalized: params["scale"] = c.params()[0]; break;
        case CostFamily::Tabulated:
            params["nodes"] = c.table_nodes();
            params["values"] = c.table_values();
            break;
    }
    return json{{"family", c.family_name()}, {"params", params}};
}

// Splits one CSV record; no quoting is needed for numeric files.
std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, const std::string& source, std::size_t line, const std::string& column) {
    const char* b = cell.data();
    const char* e = cell.data() + cell.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e || b == e) {
        std::ostringstream os;
        os << source << ":" << line << ": column " << column << ": not a number: \"" << cell << "\"";
        throw InputError(os.str());
    }
    return v;
}

std::vector<std::vector<double>> read_table(std::istream& is, const std::vector<std::string>& columns,
                                            const std::string& source) {
    std::string line;
    if (!std::getline(is, line)) throw InputError(source + ": empty file (header row required)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split(line);
    if (header.size() < columns.size() || !std::equal(columns.begin(), columns.end(), header.begin())) {
        std::ostringstream os;
        os << source << ":1: header must start with ";
        for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
        throw InputError(os.str());
    }
    std::vector<std::vector<double>> cols(columns.size());
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            std::ostringstream os;
            os << source << ":" << lineno << ": expected " << header.size() << " columns, found " << cells.size();
            throw InputError(os.str());
        }
        for (std::size_t c = 0; c < columns.size(); ++c) cols[c].push_back(parse_cell(cells[c], source, lineno, columns[c]));
    }
    if (cols[0].size() < 2) throw InputError(source + ": need at least two data rows");
    for (std::size_t i = 1; i < cols[0].size(); ++i)
        if (!(cols[0][i] > cols[0][i - 1])) {
            std::ostringstream os;
            os << source << ":" << i + 2 << ": column y must be strictly ascending";
            throw InputError(os.str());
        }
    return cols;
}

json interval_value(const IntervalBounds& b) {
    if (b.empty) return nullptr;
    return json::array({b.lo, b.hi});
}

}  // namespace

Environment parse_environment(const std::string& text, bool checked) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("environment config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw InputError("environment config: top level must be an object");
    const std::string w = "environment config";
    const double x_lo = number_field(j, "x_lo", w);
    const double x_hi = number_field(j, "x_hi", w);
    const double tau = number_field(j, "tau", w);
    const double kappa = number_field(j, "kappa", w, false, 1.0);
    if (!j.contains("c_A")) throw InputError(w + ": missing field \"c_A\"");
    if (!j.contains("c_P")) throw InputError(w + ": missing field \"c_P\"");
    CostFunction cA = parse_cost(j.at("c_A"), "c_A");
    CostFunction cP = parse_cost(j.at("c_P"), "c_P");
    try {
        return Environment::make(x_lo, x_hi, tau, std::move(cA), std::move(cP), kappa, checked);
    } catch (const InvariantViolation& e) {
        if (checked) throw;
        throw InputError(w + ": " + e.what());
    }
}

Environment load_environment(const std::string& path, bool checked) {
    return parse_environment(read_text_file(path), checked);
}

std::string environment_to_json(const Environment& env) {
    json j = {{"x_lo", env.x_lo},
              {"x_hi", env.x_hi},
              {"tau", env.tau},
              {"c_A", cost_to_json(env.c_A)},
              {"c_P", cost_to_json(env.c_P_base)},
              {"kappa", env.kappa}};
    return j.dump(2) + "\n";
}

void write_mechanism_csv(std::ostream& os, const Mechanism& mech, const DerivedSchedules* derived) {
    os << "y,e_A,e_P,r_A,r_P,r_empty";
    if (derived) os << ",U,Pi,lambda";
    os << '\n';
    for (std::size_t i = 0; i < mech.size(); ++i) {
        os << format_number(mech.y[i]) << ',' << format_number(mech.e_A[i]) << ',' << format_number(mech.e_P[i]) << ','
           << format_number(mech.r_A[i]) << ',' << format_number(mech.r_P[i]) << ','
           << format_number(mech.r_empty[i]);
        if (derived)
            os << ',' << format_number(derived->U[i]) << ',' << format_number(derived->Pi[i]) << ','
               << format_number(derived->lambda_m[i]);
        os << '\n';
    }
}

Mechanism read_mechanism_csv(std::istream& is, const std::string& source) {
    auto cols = read_table(is, {"y", "e_A", "e_P", "r_A", "r_P", "r_empty"}, source);
    Mechanism m;
    m.y = std::move(cols[0]);
    m.e_A = std::move(cols[1]);
    m.e_P = std::move(cols[2]);
    m.r_A = std::move(cols[3]);
    m.r_P = std::move(cols[4]);
    m.r_empty = std::move(cols[5]);
    return m;
}

Mechanism load_mechanism(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open mechanism file " + path);
    return read_mechanism_csv(in, path);
}

void write_loss_csv(std::ostream& os, const LossFunction& lam) {
    os << "y,lambda\n";
    for (std::size_t i = 0; i < lam.size(); ++i) os << format_number(lam.grid()[i]) << ',' << format_number(lam.at(i)) << '\n';
}

LossFunction read_loss_csv(std::istream& is, LossClass cls, double tau, const std::string& source) {
    auto cols = read_table(is, {"y", "lambda"}, source);
    const std::string bad = LossFunction::violation(cols[0], cols[1], cls, tau, 1e-9);
    if (!bad.empty()) throw InputError(source + ": " + bad);
    return LossFunction(std::move(cols[0]), std::move(cols[1]), cls, tau, 1e-9);
}

LossFunction load_loss(const std::string& path, LossClass cls, double tau) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open loss file " + path);
    return read_loss_csv(in, cls, tau, path);
}

std::string intervals_json(const IntervalPartition& part) {
    static const char* names[5] = {"I_SL", "I_L", "I_M", "I_H", "I_SH"};
    json j = json::object();
    json knots = json::object();
    for (int k = 0; k < 5; ++k) {
        j[names[k]] = interval_value(part.intervals[k]);
        knots[names[k]] = part.intervals[k].count();
    }
    j["ep_one_region"] = interval_value(part.ep_one);
    j["ep_zero_region"] = interval_value(part.ep_zero);
    knots["ep_one_region"] = part.ep_one.count();
    knots["ep_zero_region"] = part.ep_zero.count();
    j["knots"] = knots;
    j["relabeled"] = part.relabeled;
    j["random_audits"] = part.random_audits();
    return j.dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path);
    out << content;
    if (!out) throw InputError("write failed for " + path);
}

}  // namespace tightmech
