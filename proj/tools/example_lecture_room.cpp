// SPDX-License-Identifier: Apache-2.0
//
// qdchan: quasi-deterministic mmWave channel generator
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// Minimal library walk-through: trace one TX/RX pair in the lecture room,
// grow quasi-deterministic clusters around each D-ray and summarise them.

#include "qdchan.hpp"

#include <cstdio>
#include <cstdlib>

int main(int argc, char **argv)
{
    using namespace qdchan;

    const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;

    Room room;
    room.dimensions = {10.0, 19.0, 3.0};
    room.face_materials = {"Left Wall (TX2)", "Right Wall (TX1)", "Bottom Wall (TX3)",
                           "Top Wall (TX1)",  "Floor",            "Ceiling (TX1)"};

    auto library = lecture_room_library();
    library.set_fallback("Floor", "Ceiling (TX1)"); // floor not characterised: RL only

    const Point3 tx{2.0, 3.0, 2.5};
    const Point3 rx{5.0, 9.0, 1.5};

    QdConfig cfg; // reduced model, second order, 3 pre / 16 post
    const auto ch = generate_channel(room, tx, rx, library, cfg, RngStream(seed));

    std::printf("direct  t0 = %.3f ns  PG = %.2f dB\n", ch.t_dir_ns, ch.direct->pg_db);
    std::printf("%-4s %-5s %-38s %9s %9s %5s %5s\n", "id", "order", "materials", "tau [ns]", "PG0 [dB]", "pre",
                "post");
    for (std::size_t i = 0; i < ch.clusters.size(); ++i) {
        const auto &c = ch.clusters[i];
        std::string mats;
        for (const auto &m : c.dray.materials)
            mats += (mats.empty() ? "" : " > ") + m;
        std::printf("%-4zu %-5d %-38s %9.3f %9.2f %5zu %5zu\n", i + 1, c.dray.order, mats.c_str(), c.dray.tau_ns,
                    c.realized_pg0_db, c.pre.size(), c.post.size());
    }

    const auto samples = to_samples(ch);
    std::printf("%zu MPCs, RMS delay spread %.3f ns\n", samples.size(),
                rms_delay_spread(std::span<const MpcSample>(samples)));

    // The same geometry with specular rays only, for contrast.
    cfg.variant = ModelVariant::drays_only;
    const auto det = to_samples(generate_channel(room, tx, rx, library, cfg, RngStream(seed)));
    std::printf("D-rays only: %zu MPCs, RMS delay spread %.3f ns\n", det.size(),
                rms_delay_spread(std::span<const MpcSample>(det)));
    return 0;
}
