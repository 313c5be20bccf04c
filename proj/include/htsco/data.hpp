#ifndef HTSCO_DATA_HPP
#define HTSCO_DATA_HPP

#include "htsco/vec.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace htsco {

// One sample s and its induced convex loss f(.; s). Evaluators are plain
// closures over the payload; `payload` is the problem-specific column data
// used for CSV round trips. `lip_overestimate` carries the known bound
// L-bar when the generator provides one.
struct SampleLoss {
    std::int64_t id = 0;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    std::optional<double> lip_overestimate;
    Vec payload;
};

struct Dataset {
    std::vector<SampleLoss> samples;

    std::size_t size() const { return samples.size(); }
    const SampleLoss& operator[](std::size_t i) const { return samples[i]; }
    SampleLoss& operator[](std::size_t i) { return samples[i]; }

    // Neighboring dataset: same size, entry `index` replaced.
    Dataset neighbor(std::size_t index, SampleLoss replacement) const;
};

// Mean clipped sample gradient at x: (1/n) sum_i Pi_C(grad f_i(x)).
Vec mean_clipped_gradient(const Dataset& data, const Vec& x, double C);
Vec mean_gradient(const Dataset& data, const Vec& x);

// G_1..G_k bounds on the Lipschitz-constant moments, E L_s^j <= G_j^j.
struct MomentProfile {
    int k = 2;
    std::vector<double> G;  // G[j-1] bounds the j-th moment, j = 1..k

    MomentProfile() = default;
    MomentProfile(int k_order, std::vector<double> bounds);
    double g(int j) const;  // G_j
    double gk() const { return g(k); }
    void validate() const;
};

// CSV round trip: header `sample_id,field_1..field_m`, one row per sample
// payload. Reading recovers ids and payloads; the owning problem rebuilds
// the loss closures.
void write_dataset_csv(std::ostream& os, const Dataset& data);
struct DatasetPayload {
    std::vector<std::int64_t> ids;
    std::vector<Vec> payloads;
};
DatasetPayload read_dataset_csv(std::istream& is);

}  // namespace htsco

#endif
