#include "htsco/data.hpp"
#include "htsco/domain.hpp"
#include "htsco/errors.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace htsco {

Dataset Dataset::neighbor(std::size_t index, SampleLoss replacement) const {
    require(index < samples.size(), "neighbor index out of range");
    Dataset out = *this;
    out.samples[index] = std::move(replacement);
    return out;
}

Vec mean_gradient(const Dataset& data, const Vec& x) {
    require(!data.samples.empty(), "empty dataset");
    Vec acc = zeros(x.size());
    for (const auto& s : data.samples) add_inplace(acc, s.gradient(x));
    return scaled(std::move(acc), 1.0 / static_cast<double>(data.size()));
}

Vec mean_clipped_gradient(const Dataset& data, const Vec& x, double C) {
    require(!data.samples.empty(), "empty dataset");
    Vec acc = zeros(x.size());
    for (const auto& s : data.samples) add_inplace(acc, clip(s.gradient(x), C));
    return scaled(std::move(acc), 1.0 / static_cast<double>(data.size()));
}

MomentProfile::MomentProfile(int k_order, std::vector<double> bounds)
    : k(k_order), G(std::move(bounds)) {
    validate();
}

void MomentProfile::validate() const {
    require(k >= 2, "moment profile requires k >= 2");
    require(static_cast<int>(G.size()) == k, "moment profile needs G_1..G_k");
    double prev = 0.0;
    for (double g : G) {
        require(std::isfinite(g) && g > 0.0, "moment bounds must be finite and positive");
        require(g >= prev, "moment bounds must be nondecreasing");
        prev = g;
    }
}

double MomentProfile::g(int j) const {
    require(j >= 1 && j <= k, "moment order out of range");
    return G[static_cast<std::size_t>(j - 1)];
}

namespace {
void append_double(std::string& row, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    row += buf;
}
}  // namespace

void write_dataset_csv(std::ostream& os, const Dataset& data) {
    require(!data.samples.empty(), "empty dataset");
    const std::size_t m = data.samples.front().payload.size();
    std::string header = "sample_id";
    for (std::size_t j = 1; j <= m; ++j) header += ",field_" + std::to_string(j);
    os << header << "\n";
    for (const auto& s : data.samples) {
        require(s.payload.size() == m, "inconsistent payload width");
        std::string row = std::to_string(s.id);
        for (double v : s.payload) {
            row += ',';
            append_double(row, v);
        }
        os << row << "\n";
    }
}

DatasetPayload read_dataset_csv(std::istream& is) {
    DatasetPayload out;
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), "missing CSV header");
    require(line.rfind("sample_id", 0) == 0, "bad CSV header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        require(static_cast<bool>(std::getline(ss, field, ',')), "bad CSV row");
        out.ids.push_back(std::stoll(field));
        Vec payload;
        while (std::getline(ss, field, ',')) payload.push_back(std::stod(field));
        out.payloads.push_back(std::move(payload));
    }
    return out;
}

}  // namespace htsco
