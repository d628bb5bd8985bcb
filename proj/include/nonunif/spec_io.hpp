#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "descriptor.hpp"
#include "integrands.hpp"
#include "lattice.hpp"

namespace nonunif {

// Plain `[section]` / `key = value` text; `#` starts a comment line.
struct IniSection {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;

    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return &v;
        return nullptr;
    }
    std::string text(const std::string& key) const {
        const auto* v = find(key);
        if (!v) throw ParseError("section [" + name + "] lacks key '" + key + "'");
        return *v;
    }
    std::string text_or(const std::string& key, const std::string& fallback) const {
        const auto* v = find(key);
        return v ? *v : fallback;
    }
    double number(const std::string& key) const { return Descriptor::parse_number(text(key), key); }
    double number_or(const std::string& key, double fallback) const {
        const auto* v = find(key);
        return v ? Descriptor::parse_number(*v, key) : fallback;
    }
    int integer_or(const std::string& key, int fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        const double d = Descriptor::parse_number(*v, key);
        if (d != std::floor(d)) throw ParseError("key '" + key + "' must be an integer");
        return int(d);
    }
    bool flag_or(const std::string& key, bool fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        throw ParseError("key '" + key + "' must be true or false");
    }
    void set(const std::string& key, std::string value) { entries.emplace_back(key, std::move(value)); }
    void set(const std::string& key, double value) { entries.emplace_back(key, fmt_real(value)); }
};

struct IniDocument {
    std::vector<IniSection> sections;

    IniSection& add(const std::string& name) {
        sections.push_back(IniSection{name, {}});
        return sections.back();
    }
    const IniSection* first(const std::string& name) const {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }
    const IniSection& require(const std::string& name) const {
        const auto* s = first(name);
        if (!s) throw ParseError("missing section [" + name + "]");
        return *s;
    }
    std::vector<const IniSection*> all(const std::string& name) const {
        std::vector<const IniSection*> out;
        for (const auto& s : sections)
            if (s.name == name) out.push_back(&s);
        return out;
    }

    std::string str() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < sections.size(); ++i) {
            if (i) os << '\n';
            os << '[' << sections[i].name << "]\n";
            for (const auto& [k, v] : sections[i].entries) os << k << " = " << v << '\n';
        }
        return os.str();
    }

    static IniDocument parse(const std::string& text) {
        IniDocument doc;
        std::istringstream is(text);
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const std::string t = Descriptor::trim(line);
            if (t.empty() || t[0] == '#' || t[0] == ';') continue;
            if (t.front() == '[') {
                if (t.back() != ']') throw ParseError("line " + std::to_string(lineno) + ": unterminated section header");
                doc.add(Descriptor::trim(t.substr(1, t.size() - 2)));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
            if (doc.sections.empty()) throw ParseError("line " + std::to_string(lineno) + ": entry before any section");
            const std::string key = Descriptor::trim(t.substr(0, eq));
            if (key.empty()) throw ParseError("line " + std::to_string(lineno) + ": empty key");
            doc.sections.back().set(key, Descriptor::trim(t.substr(eq + 1)));
        }
        return doc;
    }
};

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

inline void append_integrand(IniDocument& doc, const IntegrandSpec& sp) {
    auto& s = doc.add("integrand");
    s.set("family", family_name(sp.family));
    s.set("p", sp.p);
    s.set("q", sp.q);
    s.set("nu", sp.nu);
    s.set("L", sp.L);
    s.set("s", sp.s);
    s.set("alpha", sp.alpha);
    s.set("a", sp.a.str());
    s.set("c", sp.c.str());
    s.set("exponent", sp.exponent.str());
    s.set("modulus", sp.modulus.str());
    for (const auto& ph : sp.phases) {
        auto& ps = doc.add("phase");
        ps.set("q", ph.q);
        ps.set("alpha", ph.alpha);
        ps.set("a", ph.a.str());
    }
    for (const auto& lv : sp.levels) {
        auto& ls = doc.add("level");
        ls.set("c", lv.c.str());
        ls.set("exponent", lv.exponent.str());
    }
}

inline IntegrandSpec integrand_from(const IniDocument& doc) {
    const auto& s = doc.require("integrand");
    IntegrandSpec sp;
    sp.family = parse_family(s.text("family"));
    sp.p = s.number("p");
    sp.q = s.number_or("q", sp.p);
    sp.nu = s.number_or("nu", 1.0);
    sp.L = s.number_or("L", 1.0);
    sp.s = s.number_or("s", 0.0);
    sp.alpha = s.number_or("alpha", 1.0);
    if (const auto* v = s.find("a")) sp.a = Coefficient::parse(*v);
    if (const auto* v = s.find("c")) sp.c = Coefficient::parse(*v);
    if (const auto* v = s.find("exponent")) sp.exponent = Coefficient::parse(*v);
    if (const auto* v = s.find("modulus")) sp.modulus = Modulus::parse(*v);
    for (const auto* ps : doc.all("phase"))
        sp.phases.push_back(Phase{ps->number("q"), ps->number_or("alpha", 1.0), Coefficient::parse(ps->text("a"))});
    for (const auto* ls : doc.all("level"))
        sp.levels.push_back(ExpLevel{Coefficient::parse(ls->text("c")), Coefficient::parse(ls->text("exponent"))});
    sp.validate();
    return sp;
}

inline std::string serialize_integrand(const IntegrandSpec& sp) {
    IniDocument doc;
    append_integrand(doc, sp);
    return doc.str();
}

inline IntegrandSpec parse_integrand(const std::string& text) { return integrand_from(IniDocument::parse(text)); }

inline IntegrandSpec load_integrand(const std::string& path) { return parse_integrand(read_text_file(path)); }

}  // namespace nonunif
