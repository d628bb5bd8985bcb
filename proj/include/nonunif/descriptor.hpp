#pragma once

#include <cctype>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "lattice.hpp"

namespace nonunif {

// A call-like descriptor `name(key=value, key=value)`.
struct Descriptor {
    std::string name;
    std::vector<std::pair<std::string, std::string>> args;

    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : args)
            if (k == key) return &v;
        return nullptr;
    }

    double number(const std::string& key) const {
        const std::string* v = find(key);
        if (!v) throw ParseError("descriptor " + name + " is missing argument '" + key + "'");
        return parse_number(*v, name + "." + key);
    }

    double number_or(const std::string& key, double fallback) const {
        const std::string* v = find(key);
        return v ? parse_number(*v, name + "." + key) : fallback;
    }

    std::string text(const std::string& key) const {
        const std::string* v = find(key);
        if (!v) throw ParseError("descriptor " + name + " is missing argument '" + key + "'");
        return *v;
    }

    void expect_keys(std::initializer_list<const char*> allowed) const {
        for (const auto& [k, v] : args) {
            bool ok = false;
            for (const char* a : allowed) ok = ok || k == a;
            if (!ok) throw ParseError("descriptor " + name + " does not take argument '" + k + "'");
        }
    }

    std::string str() const {
        std::string out = name + "(";
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (i) out += ", ";
            out += args[i].first + "=" + args[i].second;
        }
        return out + ")";
    }

    static double parse_number(const std::string& s, const std::string& what) {
        if (s == "inf") return kInf;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ParseError("'" + s + "' is not a number (" + what + ")");
        }
        if (used != s.size()) throw ParseError("'" + s + "' is not a number (" + what + ")");
        return v;
    }

    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static Descriptor parse(const std::string& raw) {
        const std::string s = trim(raw);
        const auto open = s.find('(');
        if (open == std::string::npos || s.back() != ')')
            throw ParseError("descriptor '" + s + "' must look like name(key=value, ...)");
        Descriptor d;
        d.name = trim(s.substr(0, open));
        if (d.name.empty()) throw ParseError("descriptor '" + s + "' has no name");
        const std::string body = s.substr(open + 1, s.size() - open - 2);
        std::size_t pos = 0;
        while (pos < body.size()) {
            auto comma = body.find(',', pos);
            if (comma == std::string::npos) comma = body.size();
            const std::string item = trim(body.substr(pos, comma - pos));
            pos = comma + 1;
            if (item.empty()) continue;
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw ParseError("descriptor argument '" + item + "' needs key=value");
            d.args.emplace_back(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
        }
        return d;
    }
};

inline Descriptor make_descriptor(std::string name, std::vector<std::pair<std::string, double>> nums) {
    Descriptor d{std::move(name), {}};
    for (auto& [k, v] : nums) d.args.emplace_back(k, fmt_real(v));
    return d;
}

}  // namespace nonunif
