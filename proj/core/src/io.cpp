#include "ctes/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ctes {

FileFormat format_from_string(const std::string& s) {
    if (s == "csv") return FileFormat::csv;
    if (s == "jsonl") return FileFormat::jsonl;
    throw std::runtime_error("unknown dataset format '" + s + "'");
}

namespace {

struct Row {
    std::string seq_id;
    double time;
    std::string mark;
    std::optional<std::pair<double, double>> loc;
    bool imputed = false;
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": cannot parse number '" + s + "'");
    }
}

std::vector<Row> parse_csv_rows(std::istream& in) {
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (header.empty()) {
            header = fields;
            if (header.size() < 3 || header[0] != "seq_id" || header[1] != "time" ||
                header[2] != "mark")
                throw std::runtime_error("line 1: expected header seq_id,time,mark[,x,y]");
            continue;
        }
        if (fields.size() != header.size())
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": wrong field count");
        Row r;
        r.seq_id = fields[0];
        r.time = parse_double(fields[1], line_no);
        r.mark = fields[2];
        for (std::size_t i = 3; i < header.size(); ++i) {
            if (header[i] == "x") {
                double x = parse_double(fields[i], line_no);
                double y = 0.0;
                // y handled below
                r.loc = {x, y};
            } else if (header[i] == "y") {
                if (!r.loc) throw std::runtime_error("line " + std::to_string(line_no) +
                                                     ": y column without x");
                r.loc->second = parse_double(fields[i], line_no);
            } else if (header[i] == "imputed") {
                r.imputed = fields[i] == "1";
            } else {
                throw std::runtime_error("unknown CSV column '" + header[i] + "'");
            }
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<Row> parse_jsonl_rows(std::istream& in) {
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        Row r;
        try {
            r.seq_id = j.at("seq_id").get<std::string>();
            r.time = j.at("time").get<double>();
            if (j.at("mark").is_string())
                r.mark = j.at("mark").get<std::string>();
            else
                r.mark = std::to_string(j.at("mark").get<long long>());
            if (j.contains("loc")) {
                auto l = j.at("loc");
                r.loc = {l.at(0).get<double>(), l.at(1).get<double>()};
            }
            if (j.contains("imputed")) r.imputed = j.at("imputed").get<int>() != 0;
        } catch (const std::exception& e) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace

Dataset parse_dataset(std::istream& in, FileFormat format) {
    std::vector<Row> rows =
        format == FileFormat::csv ? parse_csv_rows(in) : parse_jsonl_rows(in);

    Dataset ds;
    std::map<std::string, int> mark_index;
    std::map<std::string, std::size_t> seq_index;
    std::vector<std::string> seq_order;

    for (auto& r : rows) {
        auto mit = mark_index.find(r.mark);
        int m;
        if (mit == mark_index.end()) {
            m = static_cast<int>(ds.vocab.size());
            mark_index.emplace(r.mark, m);
            ds.vocab.push_back(r.mark);
        } else {
            m = mit->second;
        }
        auto sit = seq_index.find(r.seq_id);
        if (sit == seq_index.end()) {
            seq_index.emplace(r.seq_id, ds.sequences.size());
            Sequence s;
            s.id = r.seq_id;
            ds.sequences.push_back(std::move(s));
            sit = seq_index.find(r.seq_id);
        }
        Event e;
        e.mark = m;
        e.time = r.time;
        e.location = r.loc;
        e.imputed = r.imputed;
        ds.sequences[sit->second].events.push_back(e);
    }

    for (auto& s : ds.sequences) {
        std::stable_sort(s.events.begin(), s.events.end(),
                         [](const Event& a, const Event& b) { return a.time < b.time; });
        for (std::size_t i = 1; i < s.events.size(); ++i)
            if (s.events[i].time == s.events[i - 1].time)
                throw std::runtime_error("sequence '" + s.id +
                                         "': duplicate timestamp " +
                                         std::to_string(s.events[i].time));
    }
    if (!ds.sequences.empty()) {
        ds.has_locations = ds.sequences.front().events.front().location.has_value();
        validate_dataset(ds);
    }
    return ds;
}

Dataset load_dataset(const std::string& path, FileFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");
    return parse_dataset(in, format);
}

Dataset load_dataset(const std::string& path) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "csv") return load_dataset(path, FileFormat::csv);
    if (ext == "jsonl") return load_dataset(path, FileFormat::jsonl);
    throw std::runtime_error("cannot infer format of '" + path + "' (use .csv or .jsonl)");
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void serialize_dataset(const Dataset& ds, std::ostream& out, FileFormat format) {
    bool any_imputed = false;
    for (const auto& s : ds.sequences)
        for (const auto& e : s.events)
            if (e.imputed) any_imputed = true;

    if (format == FileFormat::csv) {
        out << "seq_id,time,mark";
        if (ds.has_locations) out << ",x,y";
        if (any_imputed) out << ",imputed";
        out << "\n";
        for (const auto& s : ds.sequences) {
            for (const auto& e : s.events) {
                out << s.id << ',' << fmt_double(e.time) << ',' << ds.vocab[e.mark];
                if (ds.has_locations)
                    out << ',' << fmt_double(e.location->first) << ','
                        << fmt_double(e.location->second);
                if (any_imputed) out << ',' << (e.imputed ? 1 : 0);
                out << "\n";
            }
        }
    } else {
        for (const auto& s : ds.sequences) {
            for (const auto& e : s.events) {
                nlohmann::ordered_json j;
                j["seq_id"] = s.id;
                j["time"] = e.time;
                j["mark"] = ds.vocab[e.mark];
                if (e.location) j["loc"] = {e.location->first, e.location->second};
                if (e.imputed) j["imputed"] = 1;
                out << j.dump() << "\n";
            }
        }
    }
}

void save_dataset(const Dataset& ds, const std::string& path, FileFormat format) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file '" + path + "'");
    serialize_dataset(ds, out, format);
}

}  // namespace ctes
