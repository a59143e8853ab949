#include "tierplan/synthetic.hpp"

namespace tierplan {

namespace {

constexpr double kGiB = 1073741824.0;

double class_rate(const std::string &tier, io_type io, access_pattern pat) {
    if (io == io_type::copy_in || io == io_type::copy_out) return 25.0 * kGiB;
    double seq = 0.0;
    if (tier == "tmpfs") seq = 8.0 * kGiB;
    else if (tier == "ssd") seq = 2.0 * kGiB;
    else seq = 0.25 * kGiB;
    return pat == access_pattern::sequential ? seq : 0.75 * seq;
}

} // namespace

storage_profile demo_profile() {
    storage_profile p;
    const std::uint64_t nodes[] = {2, 4, 8};
    const std::pair<std::uint64_t, std::uint64_t> sizes[] = {
        {1ull << 20, 1ull << 30},
        {8ull << 20, 8ull << 30},
    };
    const io_type ios[] = {io_type::read, io_type::write, io_type::copy_in, io_type::copy_out};
    const access_pattern pats[] = {access_pattern::sequential, access_pattern::random_access};
    for (const char *tier : {"tmpfs", "ssd", "beegfs"})
        for (io_type io : ios)
            for (access_pattern pat : pats)
                for (std::uint64_t n : nodes)
                    for (auto [transfer, total] : sizes) {
                        profile_record r;
                        r.tier = tier;
                        r.io = io;
                        r.pattern = pat;
                        r.nodes = n;
                        r.tpn = 1;
                        r.transfer_size = transfer;
                        r.total_size = total;
                        r.rate = class_rate(r.tier, io, pat);
                        p.records.push_back(r);
                    }
    return p;
}

scale_point demo_scale() { return {2.0, 4}; }

std::vector<scale_point> demo_scales() {
    return {{2.0, 2}, {2.0, 4}, {2.0, 8}};
}

} // namespace tierplan
