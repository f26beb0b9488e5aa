#include "r1ppnp/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace r1ppnp {

namespace {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& token, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) {
            throw ParseError("trailing characters in number at " + where);
        }
        return v;
    } catch (const std::invalid_argument&) {
        throw ParseError("expected a number at " + where + ", got '" + token +
                         "'");
    } catch (const std::out_of_range&) {
        throw ParseError("number out of range at " + where);
    }
}

void validate_set(const CorrespondenceSet& set) {
    if (!(set.intrinsics.f > 0.0)) {
        throw ValidationError("focal length must be positive");
    }
    if (set.intrinsics.width <= 0 || set.intrinsics.height <= 0) {
        throw ValidationError("sensor resolution must be positive");
    }
    if (set.points.size() < 4) {
        throw ValidationError("at least 4 correspondences required");
    }
    for (const Correspondence& c : set.points) {
        if (!c.world.allFinite() || !std::isfinite(c.image.u) ||
            !std::isfinite(c.image.v)) {
            throw ValidationError("non-finite correspondence");
        }
    }
}

CorrespondenceSet ingest_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    CorrespondenceSet set;
    try {
        const json& intr = doc.at("intrinsics");
        set.intrinsics.f = intr.at("f").get<double>();
        set.intrinsics.cu = intr.value("cu", 0.0);
        set.intrinsics.cv = intr.value("cv", 0.0);
        set.intrinsics.width = intr.value("width", 640);
        set.intrinsics.height = intr.value("height", 480);
        for (const json& pt : doc.at("points")) {
            Correspondence c;
            c.world = Vec3(pt.at("X").get<double>(), pt.at("Y").get<double>(),
                           pt.at("Z").get<double>());
            c.image.u = pt.at("u").get<double>() - set.intrinsics.cu;
            c.image.v = pt.at("v").get<double>() - set.intrinsics.cv;
            c.image.f = set.intrinsics.f;
            set.points.push_back(c);
        }
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    validate_set(set);
    return set;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

const char* kCsvHeader = "f,cu,cv,width,height,X,Y,Z,u,v";

CorrespondenceSet ingest_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) {
        throw ParseError(path + ":1: expected header '" +
                         std::string(kCsvHeader) + "'");
    }
    CorrespondenceSet set;
    bool have_intrinsics = false;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 10) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": expected 10 fields, got " +
                             std::to_string(fields.size()));
        }
        const std::string where = path + ":" + std::to_string(line_no);
        const double f = parse_double(fields[0], where + " field f");
        const double cu = parse_double(fields[1], where + " field cu");
        const double cv = parse_double(fields[2], where + " field cv");
        const int width =
            static_cast<int>(parse_double(fields[3], where + " field width"));
        const int height =
            static_cast<int>(parse_double(fields[4], where + " field height"));
        if (!have_intrinsics) {
            set.intrinsics = {f, cu, cv, width, height};
            have_intrinsics = true;
        } else if (f != set.intrinsics.f || cu != set.intrinsics.cu ||
                   cv != set.intrinsics.cv) {
            throw ParseError(where + ": intrinsics differ between rows");
        }
        Correspondence c;
        c.world = Vec3(parse_double(fields[5], where + " field X"),
                       parse_double(fields[6], where + " field Y"),
                       parse_double(fields[7], where + " field Z"));
        c.image.u = parse_double(fields[8], where + " field u") - cu;
        c.image.v = parse_double(fields[9], where + " field v") - cv;
        c.image.f = f;
        set.points.push_back(c);
    }
    if (!have_intrinsics) throw ParseError(path + ": no data rows");
    validate_set(set);
    return set;
}

}  // namespace

CorrespondenceSet ingest_correspondences(const std::string& path,
                                         CorrespondenceFormat format) {
    if (format == CorrespondenceFormat::Auto) {
        format = path.size() >= 4 && path.substr(path.size() - 4) == ".csv"
                     ? CorrespondenceFormat::Csv
                     : CorrespondenceFormat::Json;
    }
    return format == CorrespondenceFormat::Csv ? ingest_csv(path)
                                               : ingest_json(path);
}

void write_correspondences_json(const CorrespondenceSet& set,
                                const std::string& path) {
    json doc;
    doc["intrinsics"] = {{"f", set.intrinsics.f},
                         {"cu", set.intrinsics.cu},
                         {"cv", set.intrinsics.cv},
                         {"width", set.intrinsics.width},
                         {"height", set.intrinsics.height}};
    json pts = json::array();
    for (const Correspondence& c : set.points) {
        pts.push_back({{"X", c.world.x()},
                       {"Y", c.world.y()},
                       {"Z", c.world.z()},
                       {"u", c.image.u + set.intrinsics.cu},
                       {"v", c.image.v + set.intrinsics.cv}});
    }
    doc["points"] = std::move(pts);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

void write_correspondences_csv(const CorrespondenceSet& set,
                               const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << kCsvHeader << '\n';
    for (const Correspondence& c : set.points) {
        out << format_double(set.intrinsics.f) << ','
            << format_double(set.intrinsics.cu) << ','
            << format_double(set.intrinsics.cv) << ',' << set.intrinsics.width
            << ',' << set.intrinsics.height << ','
            << format_double(c.world.x()) << ',' << format_double(c.world.y())
            << ',' << format_double(c.world.z()) << ','
            << format_double(c.image.u + set.intrinsics.cu) << ','
            << format_double(c.image.v + set.intrinsics.cv) << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

CorrespondenceSet to_correspondence_set(const SyntheticInstance& instance) {
    CorrespondenceSet set;
    set.intrinsics.f = instance.config.focal;
    set.intrinsics.cu = 0.0;
    set.intrinsics.cv = 0.0;
    set.intrinsics.width = instance.config.width;
    set.intrinsics.height = instance.config.height;
    set.points = instance.correspondences;
    return set;
}

void write_truth_json(const SyntheticInstance& instance,
                      const std::string& path) {
    json doc;
    json rot = json::array();
    for (int r = 0; r < 3; ++r) {
        json row = json::array();
        for (int c = 0; c < 3; ++c) {
            row.push_back(instance.truth_pose.rotation(r, c));
        }
        rot.push_back(std::move(row));
    }
    doc["rotation"] = std::move(rot);
    doc["translation"] = {instance.truth_pose.translation.x(),
                          instance.truth_pose.translation.y(),
                          instance.truth_pose.translation.z()};
    doc["inlier_mask"] = instance.truth_inlier_mask;
    doc["seed"] = instance.config.seed;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace r1ppnp
