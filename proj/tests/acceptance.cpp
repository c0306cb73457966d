#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "eip/client.hpp"
#include "eip/engine.hpp"
#include "eip/errors.hpp"
#include "eip/net.hpp"
#include "eip/plcsim.hpp"
#include "eip/scanner.hpp"
#include "eip/tags.hpp"
#include "eip/wire.hpp"
#include "oracle.hpp"
#include "process.hpp"
#include "sim_support.hpp"

using namespace eip;
using namespace eip::scanner;
using namespace std::chrono_literals;

namespace {

double ms(Clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); }

std::string name15(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "Analog_chan_%03d", i);
    return buf;
}

TagSpec input(const std::string& tag, Period period, bool bool_array = false, bool coalesce = true) {
    TagSpec s;
    s.ref = bool_array ? tags::parse_bool_array_tag(tag) : tags::parse_tag(tag);
    s.period = period;
    s.coalesce = coalesce;
    return s;
}

template <class Pred>
bool eventually(Pred pred, std::chrono::milliseconds within) {
    const auto deadline = Clock::now() + within;
    while (Clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(10ms);
    }
    return pred();
}

client::PlcEndpoint local(std::uint16_t port) {
    client::PlcEndpoint ep;
    ep.port = port;
    ep.request_timeout = 1000ms;
    return ep;
}

// Forwards one client connection to the target and keeps every client frame.
class Relay {
public:
    explicit Relay(std::uint16_t target) : target_(target), listener_(net::TcpListener::bind("127.0.0.1", 0)) {
        thread_ = std::thread([this] { run(); });
    }
    ~Relay() {
        stop_ = true;
        thread_.join();
    }
    std::uint16_t port() const { return listener_.port(); }
    std::vector<Bytes> frames() const {
        std::lock_guard lock(mutex_);
        return frames_;
    }

private:
    void run() {
        std::optional<net::TcpStream> down;
        while (!stop_ && !down) down = listener_.accept(50ms);
        if (!down) return;
        auto up = net::TcpStream::connect("127.0.0.1", target_, 1000ms);
        while (!stop_) {
            try {
                if (!down->readable(50ms)) continue;
                auto frame = down->recv_frame(Clock::now() + 2s);
                {
                    std::lock_guard lock(mutex_);
                    frames_.push_back(frame);
                }
                up.send_all(frame, Clock::now() + 2s);
                down->send_all(up.recv_frame(Clock::now() + 2s), Clock::now() + 2s);
            } catch (const Error&) {
                return;
            }
        }
    }

    std::uint16_t target_;
    net::TcpListener listener_;
    std::atomic<bool> stop_{false};
    std::thread thread_;
    mutable std::mutex mutex_;
    std::vector<Bytes> frames_;
};

class CriterionPrinter : public ::testing::EmptyTestEventListener {
public:
    void OnTestEnd(const ::testing::TestInfo& info) override {
        const std::string name = info.name();
        const int n = std::atoi(name.c_str() + 2);
        const bool ok = info.result()->Passed();
        passed_ += ok;
        ++total_;
        std::printf("AC%d %s  %s\n", n, ok ? "PASS" : "FAIL", name.c_str() + 5);
        std::fflush(stdout);
    }
    void OnTestProgramEnd(const ::testing::UnitTest&) override {
        std::printf("acceptance: %d/%d criteria passed\n", passed_, total_);
    }

private:
    int passed_ = 0;
    int total_ = 0;
};

}  // namespace

TEST(Acceptance, AC01_RealWireDecode) {
    cip::CipResponse resp;
    resp.service = 0xCC;
    resp.data = {0xCA, 0x00, 0x00, 0x80, 0x38, 0x3B};
    const auto v = cip::parse_read_response(resp);
    ASSERT_EQ(v.type(), cip::ElemType::Real);
    EXPECT_NEAR(v.as_real(0), 0.002815, 1e-6);
    EXPECT_EQ(v.as_real(0), oracle::real_value(oracle::le32(resp.data, 2)));
}

TEST(Acceptance, AC02_IdentityOverCli) {
    auto sim = std::make_shared<plcsim::Simulator>();
    plcsim::Server server(sim);
    server.start();
    const auto start = Clock::now();
    proc::Child tool({EIPTOOL_PATH, "info", "127.0.0.1:" + std::to_string(server.port())});
    const auto line = tool.read_line(2s);
    EXPECT_EQ(tool.wait(), 0);
    ASSERT_TRUE(line);
    EXPECT_EQ(*line, "1756-ENET/A ");
    EXPECT_EQ(line->size(), 12u);
    EXPECT_LT(ms(Clock::now() - start), 1000.0);
}

TEST(Acceptance, AC03_ReplyBitRule) {
    plcsim::Simulator sim(simtest::store_from("a DINT[8] = 1,2,3\nr REAL[4]\n"));
    simtest::Driver d(sim);
    d.register_session();
    std::mt19937 rng(3);
    const std::uint8_t services[] = {0x0E, 0x4C, 0x53, 0x0A, 0x52, 0x54, 0x4E, 0x01, 0x10, 0x4B, 0x4D};
    std::set<std::uint8_t> exercised;
    auto random_read = [&] {
        const char* names[] = {"a", "r", "zz"};
        return cip::build_read_request(
            {cip::Symbol{names[rng() % 3]}, cip::Element{static_cast<std::uint32_t>(rng() % 10)}},
            static_cast<std::uint16_t>(1 + rng() % 3));
    };
    for (int i = 0; i < 1000; ++i) {
        const auto service = services[rng() % std::size(services)];
        cip::CipRequest inner;
        bool routed = true;
        switch (service) {
        case 0x0E:
            inner = cip::build_get_attribute_single(1, 1, static_cast<std::uint16_t>(1 + rng() % 9));
            routed = false;
            break;
        case 0x4C: inner = random_read(); break;
        case 0x53:
            inner = cip::build_write_request({cip::Symbol{rng() % 2 ? "a" : "r"}, cip::Element{static_cast<std::uint32_t>(rng() % 6)}},
                                             rng() % 2 ? cip::CipValue::dints({7}) : cip::CipValue::reals({1}));
            break;
        case 0x0A: inner = cip::build_multi_request({random_read(), random_read()}); break;
        case 0x52: {
            const auto slot = static_cast<std::uint8_t>(rng() % 3);
            const auto reply = cip::decode_response(d.rr(cip::encode_request(cip::wrap_unconnected_send(random_read(), slot))));
            // A delivered message answers with the embedded reply; a routing failure answers 0x52 itself.
            EXPECT_EQ(reply.service, slot == 0 ? 0xCC : 0xD2);
            exercised.insert(service);
            continue;
        }
        case 0x54: {
            cip::ForwardOpenParams p;
            p.connection_serial = static_cast<std::uint16_t>(i);
            inner = cip::build_forward_open(p);
            routed = false;
            break;
        }
        case 0x4E: {
            cip::ForwardOpenParams p;
            p.connection_serial = static_cast<std::uint16_t>(rng() % 1000);
            inner = cip::build_forward_close(p);
            routed = false;
            break;
        }
        default: inner = cip::CipRequest{service, cip::object_path(2, 1), {}};
        }
        const auto reply = routed ? d.routed(inner) : cip::decode_response(d.rr(cip::encode_request(inner)));
        EXPECT_EQ(reply.service, service | 0x80) << std::hex << int(service);
        exercised.insert(service);
    }
    EXPECT_EQ(exercised.size(), std::size(services));
}

TEST(Acceptance, AC04_BoolRemap) {
    const std::tuple<const char*, std::uint32_t, unsigned> cases[] = {
        {"test[5]", 0, 5}, {"test[160]", 5, 0}, {"test[191]", 5, 31}};
    for (const auto& [tag, element, bit] : cases) {
        const auto [ref, b] = tags::bool_remap(tags::parse_bool_array_tag(tag));
        EXPECT_EQ(ref.parts.back().symbol, "test");
        EXPECT_EQ(ref.parts.back().index, element) << tag;
        EXPECT_EQ(b, bit) << tag;
    }
}

TEST(Acceptance, AC05_BatchingEconomy) {
    std::string defs;
    for (int i = 0; i < 15; ++i) defs += name15(i) + " REAL[1] = " + std::to_string(i) + ".5\n";
    auto sim = std::make_shared<plcsim::Simulator>(simtest::store_from(defs));
    plcsim::Server server(sim);
    server.start();

    auto run = [&](bool batch) {
        PlcEngine engine("plc", local(server.port()), EngineOptions{batch});
        for (int i = 0; i < 15; ++i) {
            ASSERT_EQ(name15(i).size(), 15u);
            engine.add(static_cast<SubscriptionId>(i + 1), input(name15(i), 1000ms));
        }
        const auto& plan = engine.plan(1000ms);
        if (batch) {
            ASSERT_EQ(plan.transfers.size(), 1u);
            std::vector<cip::CipRequest> reads;
            for (const auto& r : plan.reads) reads.push_back(r.request());
            const auto bytes = cip::encode_request(cip::build_multi_request(reads));
            EXPECT_LE(bytes.size(), 500u);
            EXPECT_LE(bytes.size() + cip::unconnected_send_overhead(bytes.size()), 500u);
        }
        engine.execute_scan(1000ms);  // connects
        sim->set_faults(plcsim::parse_faults("latency-ms=11"));
        engine.execute_scan(1000ms);
        sim->set_faults({});
        const auto s = engine.stats(1000ms);
        EXPECT_EQ(s.errors, 0u);
        for (int i = 0; i < 15; ++i) EXPECT_FLOAT_EQ(engine.value(i + 1).value.as_real(0), i + 0.5f);
        const auto wall = ms(*s.last);
        if (batch) {
            EXPECT_EQ(s.last_round_trips, 1u);
            EXPECT_LT(wall, 40.0);
        } else {
            EXPECT_EQ(s.last_round_trips, 15u);
            EXPECT_GT(wall, 150.0);
        }
        std::printf("    %s: %llu round trip(s), %.1f ms\n", batch ? "batched" : "unbatched",
                    static_cast<unsigned long long>(s.last_round_trips), wall);
    };
    run(true);
    run(false);
}

TEST(Acceptance, AC06_BoolAndRealScanScenario) {
    auto sim = std::make_shared<plcsim::Simulator>(
        simtest::store_from("bits DINT[11]\nai_a REAL[40]\nai_b REAL[40]\nai_c REAL[40]\n"),
        plcsim::parse_faults("latency-ms=5"));
    plcsim::Server server(sim);
    server.start();

    Scanner scanner;
    scanner.add_plc("plc", local(server.port()));
    for (int i = 0; i < 352; ++i) scanner.add_tag("plc", input("bits[" + std::to_string(i) + "]", 100ms, true));
    for (const char* arr : {"ai_a", "ai_b", "ai_c"}) {
        for (int i = 0; i < 40; ++i) scanner.add_tag("plc", input(std::string(arr) + "[" + std::to_string(i) + "]", 500ms));
    }
    std::mutex m;
    std::uint64_t bool_scans = 0, bad_round_trips = 0, failed = 0;
    scanner.set_observer([&](const ScanSample& s) {
        std::lock_guard lock(m);
        if (!s.ok) ++failed;
        if (s.period == 100ms) {
            ++bool_scans;
            if (s.round_trips != 1) ++bad_round_trips;
        }
    });
    scanner.start();
    // Bits change while scanning.
    const auto end = Clock::now() + 60s;
    std::int32_t word = 0;
    while (Clock::now() < end) {
        std::this_thread::sleep_for(250ms);
        sim->set_tag("bits[3]", cip::CipValue::dints({++word}));
    }
    scanner.stop();

    const auto bools = scanner.stats("plc", 100ms);
    const auto reals = scanner.stats("plc", 500ms);
    std::printf("    100 ms list: %llu scans, %llu errors, %llu overruns, max %.2f ms\n",
                static_cast<unsigned long long>(bools.count), static_cast<unsigned long long>(bools.errors),
                static_cast<unsigned long long>(bools.overruns), bools.max ? ms(*bools.max) : NAN);
    std::printf("    500 ms list: %llu scans, %llu errors, %llu overruns, max %.2f ms\n",
                static_cast<unsigned long long>(reals.count), static_cast<unsigned long long>(reals.errors),
                static_cast<unsigned long long>(reals.overruns), reals.max ? ms(*reals.max) : NAN);
    EXPECT_EQ(bools.errors, 0u);
    EXPECT_EQ(reals.errors, 0u);
    EXPECT_EQ(bools.overruns, 0u);
    EXPECT_EQ(reals.overruns, 0u);
    EXPECT_GE(bools.count, 590u);
    EXPECT_GE(reals.count, 118u);
    EXPECT_EQ(failed, 0u);
    EXPECT_EQ(bad_round_trips, 0u);
    EXPECT_EQ(bool_scans, bools.count);
}

TEST(Acceptance, AC07_CoalescingOracle) {
    auto sim = std::make_shared<plcsim::Simulator>();
    plcsim::Server server(sim);
    server.start();
    std::mt19937 rng(77);
    const cip::ElemType types[] = {cip::ElemType::Sint, cip::ElemType::Int, cip::ElemType::Dint, cip::ElemType::Real};
    int split_cases = 0;
    for (int c = 0; c < 200; ++c) {
        const auto type = types[rng() % 4];
        const std::size_t length = 1 + rng() % 400;
        std::vector<std::uint32_t> raw(length);
        for (auto& r : raw) {
            r = rng();
            if (type == cip::ElemType::Sint) r &= 0xFF;
            if (type == cip::ElemType::Int) r &= 0xFFFF;
            if (type == cip::ElemType::Real && std::isnan(oracle::real_value(r))) r = 0x3F800000u;
        }
        const std::string name = "arr" + std::to_string(c);
        sim->set_tag(name, cip::CipValue(type, raw));

        std::set<std::uint32_t> picked;
        const std::size_t want = 1 + rng() % std::min<std::size_t>(length, 40);
        while (picked.size() < want) picked.insert(static_cast<std::uint32_t>(rng() % length));
        std::vector<std::uint32_t> order(picked.begin(), picked.end());
        std::shuffle(order.begin(), order.end(), rng);

        auto ep = local(server.port());
        ep.buffer_limit = 200 + rng() % 311;
        PlcEngine coalesced("c", ep), single("s", ep);
        SubscriptionId id = 1;
        for (auto index : order) {
            const auto tag = name + "[" + std::to_string(index) + "]";
            coalesced.add(id, input(tag, 100ms, false, true));
            single.add(id, input(tag, 100ms, false, false));
            ++id;
        }
        const auto& plan = coalesced.plan(100ms);
        std::size_t covered = 0;
        for (const auto& r : plan.reads) {
            EXPECT_LE(r.response_size(), ep.buffer_limit);
            covered += r.count;
        }
        const auto estimate = cip::estimate_response_size(type, *picked.rbegin() - *picked.begin() + 1);
        if (estimate > ep.buffer_limit) {
            ++split_cases;
            EXPECT_GT(plan.reads.size(), 1u);
        }
        coalesced.execute_scan(100ms);
        single.execute_scan(100ms);
        ASSERT_EQ(coalesced.stats(100ms).errors, 0u) << "case " << c;
        ASSERT_EQ(single.stats(100ms).errors, 0u) << "case " << c;
        for (SubscriptionId k = 1; k < id; ++k) {
            const auto a = coalesced.value(k);
            const auto b = single.value(k);
            ASSERT_EQ(a.quality, Quality::Ok);
            EXPECT_EQ(a.value, b.value) << "case " << c << " member " << k;
            EXPECT_EQ(a.value.raw(0), raw[order[k - 1]]);
        }
    }
    std::printf("    200 cases, %d with spans split at the limit\n", split_cases);
    EXPECT_GT(split_cases, 10);
}

TEST(Acceptance, AC08_WholeSpanWrite) {
    auto sim = std::make_shared<plcsim::Simulator>(simtest::store_from("out DINT[16]"));
    plcsim::Server server(sim);
    server.start();
    for (const bool coalesce : {true, false}) {
        PlcEngine engine("plc", local(server.port()));
        for (std::uint32_t i : {3u, 6u, 9u}) {
            auto spec = input("out[" + std::to_string(i) + "]", 100ms, false, coalesce);
            spec.direction = Direction::Output;
            engine.add(i, spec);
        }
        engine.execute_scan(100ms);
        sim->clear_log();
        engine.stage_write(3, cip::CipValue::dints({30}));
        engine.stage_write(6, cip::CipValue::dints({60}));
        engine.flush_writes();
        std::vector<plcsim::ServiceRecord> writes;
        for (const auto& r : sim->service_log()) {
            if (r.service == 0x53) writes.push_back(r);
        }
        if (coalesce) {
            ASSERT_EQ(writes.size(), 1u);
            EXPECT_EQ(writes[0].first_element, 3u);
            EXPECT_EQ(writes[0].element_count, 7u);  // 3..9
        } else {
            ASSERT_EQ(writes.size(), 2u);
            EXPECT_EQ(writes[0].element_count, 1u);
            EXPECT_EQ(writes[1].element_count, 1u);
        }
        EXPECT_EQ(sim->get_tag("out[3]"), cip::CipValue::dints({30}));
        EXPECT_EQ(sim->get_tag("out[6]"), cip::CipValue::dints({60}));
        sim->set_tag("out", cip::CipValue::dints(std::vector<std::int32_t>(16, 0)));
    }
}

TEST(Acceptance, AC09_ReconnectAfterTargetRestart) {
    auto sim = std::make_shared<plcsim::Simulator>(simtest::store_from("v DINT[1] = 9"));
    plcsim::Server server(sim);
    server.start();
    auto ep = local(server.port());
    ep.reconnect_period = 2000ms;
    ep.request_timeout = 300ms;
    Scanner scanner;
    scanner.add_plc("plc", ep);
    const auto id = scanner.add_tag("plc", input("v", 100ms));
    scanner.start();
    ASSERT_TRUE(eventually([&] { return scanner.value(id).quality == Quality::Ok; }, 3s));

    server.stop();
    ASSERT_TRUE(eventually([&] { return scanner.value(id).quality == Quality::Error; }, 3s));
    const auto errors = scanner.stats("plc", 100ms).errors;
    EXPECT_GE(errors, 1u);
    std::this_thread::sleep_for(2500ms);
    EXPECT_GT(scanner.stats("plc", 100ms).errors, errors);

    sim->set_tag("v", cip::CipValue::dints({10}));
    server.start();
    const auto restarted = Clock::now();
    const bool resumed =
        eventually([&] { return scanner.value(id).value == cip::CipValue::dints({10}) &&
                                scanner.value(id).quality == Quality::Ok; },
                   2 * ep.reconnect_period);
    const auto took = ms(Clock::now() - restarted);
    std::printf("    resumed %.0f ms after restart (limit %lld ms)\n", took,
                static_cast<long long>(2 * ep.reconnect_period.count()));
    EXPECT_TRUE(resumed);
    const auto count = scanner.stats("plc", 100ms).count;
    EXPECT_TRUE(eventually([&] { return scanner.stats("plc", 100ms).count > count + 3; }, 2s));
    scanner.stop();
}

TEST(Acceptance, AC10_ConnectedUnconnectedParity) {
    auto sim = std::make_shared<plcsim::Simulator>(simtest::store_from("d DINT[50]\nr REAL[50]\ni INT[50]\n"));
    plcsim::Server server(sim);
    server.start();
    std::mt19937 rng(10);
    std::vector<std::int32_t> d(50);
    std::vector<float> r(50);
    for (auto& x : d) x = static_cast<std::int32_t>(rng());
    for (auto& x : r) x = std::ldexp(static_cast<float>(rng() % 100000), -static_cast<int>(rng() % 20));
    sim->set_tag("d", cip::CipValue::dints(d));
    sim->set_tag("r", cip::CipValue::reals(r));

    Relay relay(server.port());
    auto connected_ep = local(relay.port());
    connected_ep.connected_messaging = true;
    client::Session connected(connected_ep);
    client::Session unconnected(local(server.port()));
    connected.connect();
    unconnected.connect();
    ASSERT_EQ(connected.phase(), client::Phase::Connected);

    const char* names[] = {"d", "r", "i"};
    for (int i = 0; i < 100; ++i) {
        const auto first = rng() % 50;
        const auto count = static_cast<std::uint16_t>(1 + rng() % (50 - first));
        const auto path = tags::to_epath(tags::parse_tag(std::string(names[rng() % 3]) + "[" + std::to_string(first) + "]"));
        EXPECT_EQ(client::read_tag(connected, path, count), client::read_tag(unconnected, path, count));
    }
    const auto o_to_t = connected.grant()->o_to_t_id;
    connected.disconnect();

    std::vector<std::uint16_t> sequences;
    for (const auto& frame : relay.frames()) {
        const auto h = oracle::header(frame);
        if (h.command != 0x70) continue;
        const auto items = oracle::carrier_items(Bytes(frame.begin() + 24, frame.end()));
        ASSERT_EQ(items.size(), 2u);
        EXPECT_EQ(items[0].type, 0xA1);
        EXPECT_EQ(oracle::le32(items[0].data, 0), o_to_t);
        sequences.push_back(oracle::le16(items[1].data, 0));
    }
    ASSERT_EQ(sequences.size(), 100u);
    for (std::size_t i = 1; i < sequences.size(); ++i) {
        EXPECT_EQ(sequences[i], static_cast<std::uint16_t>(sequences[i - 1] + 1));
    }
}

TEST(Acceptance, AC11_CodecFuzz) {
    std::mt19937 rng(1111);
    auto random_bytes = [&](std::size_t max) {
        Bytes b(rng() % (max + 1));
        for (auto& x : b) x = static_cast<std::uint8_t>(rng());
        return b;
    };
    auto random_path = [&] {
        cip::Epath path;
        for (int k = 1 + static_cast<int>(rng() % 5); k > 0; --k) {
            const std::uint32_t wide = rng() >> (rng() % 32);
            switch (rng() % 5) {
            case 0: path.push_back(cip::ClassId{static_cast<std::uint16_t>(wide)}); break;
            case 1: path.push_back(cip::InstanceId{static_cast<std::uint16_t>(wide)}); break;
            case 2: path.push_back(cip::AttributeId{static_cast<std::uint16_t>(wide)}); break;
            case 3: path.push_back(cip::Element{wide}); break;
            default: path.push_back(cip::Symbol{std::string(1 + rng() % 40, static_cast<char>('A' + rng() % 26))});
            }
        }
        return path;
    };
    auto random_value = [&] {
        const cip::ElemType types[] = {cip::ElemType::Bool, cip::ElemType::Sint, cip::ElemType::Int,
                                       cip::ElemType::Dint, cip::ElemType::Real};
        const auto type = types[rng() % 5];
        std::vector<double> v(1 + rng() % 30);
        for (auto& x : v) {
            switch (type) {
            case cip::ElemType::Bool: x = rng() % 2; break;
            case cip::ElemType::Sint: x = static_cast<std::int8_t>(rng()); break;
            case cip::ElemType::Int: x = static_cast<std::int16_t>(rng()); break;
            case cip::ElemType::Dint: x = static_cast<std::int32_t>(rng()); break;
            default: x = std::ldexp(static_cast<double>(static_cast<std::int32_t>(rng() % 2000000) - 1000000), -static_cast<int>(rng() % 40));
            }
        }
        return cip::CipValue::from_doubles(type, v);
    };

    int mismatches = 0;
    int panics = 0;
    std::vector<Bytes> corpus;
    for (int i = 0; i < 10000; ++i) {
        switch (i % 4) {
        case 0: {
            encap::Header h;
            h.command = static_cast<std::uint16_t>(rng());
            h.session_handle = rng();
            h.status = rng();
            h.options = rng();
            const auto payload = random_bytes(200);
            const auto bytes = encode_packet(h, payload);
            const auto back = encap::decode_packet(bytes);
            h.payload_length = static_cast<std::uint16_t>(payload.size());
            mismatches += !(back.header == h && back.payload == payload);
            corpus.push_back(bytes);
            corpus.push_back(encap::build_unit_data(rng(), rng(), static_cast<std::uint16_t>(rng()), payload));
            break;
        }
        case 1: {
            const cip::CipRequest req{static_cast<std::uint8_t>(rng() & 0x7F), random_path(), random_bytes(40)};
            const auto bytes = cip::encode_request(req);
            mismatches += !(cip::decode_request(bytes) == req);
            const auto segs = oracle::request(bytes).path;
            mismatches += segs.size() != req.path.size();
            corpus.push_back(bytes);
            break;
        }
        case 2: {
            const auto value = random_value();
            const auto path = tags::to_epath(tags::parse_tag("t[" + std::to_string(rng() % 1000) + "]"));
            const auto write = cip::build_write_request(path, value);
            mismatches += !(cip::parse_write_request_data(cip::decode_request(cip::encode_request(write)).data) == value);
            wire::Writer w;
            w.u16(cip::type_code(value.type()));
            value.encode_elements(w);
            const cip::CipResponse resp{0xCC, 0, {}, w.take()};
            const auto bytes = cip::encode_response(resp);
            mismatches += !(cip::parse_read_response(cip::decode_response(bytes)) == value);
            corpus.push_back(bytes);
            break;
        }
        default: {
            std::vector<cip::CipRequest> reqs;
            std::vector<cip::CipResponse> resps;
            for (int k = 1 + static_cast<int>(rng() % 8); k > 0; --k) {
                reqs.push_back(cip::build_read_request(random_path(), static_cast<std::uint16_t>(1 + rng() % 9)));
                resps.push_back(rng() % 3 ? cip::CipResponse{0xCC, 0, {}, random_bytes(20)}
                                          : cip::error_response(0x4C, 0x05, {0x1234}));
            }
            const auto multi = cip::build_multi_request(reqs);
            const auto parts = cip::split_multi_request(cip::decode_request(cip::encode_request(multi)));
            bool same = parts.size() == reqs.size();
            for (std::size_t k = 0; same && k < parts.size(); ++k) same = cip::decode_request(parts[k]) == reqs[k];
            const auto reply = cip::encode_response(cip::build_multi_response(resps));
            same = same && cip::split_multi_response(cip::decode_response(reply), resps.size()) == resps;
            mismatches += !same;
            corpus.push_back(cip::encode_request(multi));
            corpus.push_back(reply);
            break;
        }
        }
    }

    plcsim::Simulator sim(simtest::store_from("t DINT[1000]"));
    plcsim::Simulator::SessionState session;
    sim.handle_packet(session, encap::build_register_session());
    auto attempt = [&](auto&& fn) {
        try {
            fn();
        } catch (const Error&) {
        } catch (...) {
            ++panics;
        }
    };
    for (const auto& original : corpus) {
        auto m = original;
        switch (rng() % 4) {
        case 0:
            if (!m.empty()) m[rng() % m.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
            break;
        case 1: m.resize(m.empty() ? 0 : rng() % m.size()); break;
        case 2:
            for (int k = 0; k < 4 && !m.empty(); ++k) m[rng() % m.size()] = static_cast<std::uint8_t>(rng());
            break;
        default: m.push_back(static_cast<std::uint8_t>(rng()));
        }
        attempt([&] { encap::decode_packet(m); });
        attempt([&] { encap::parse_rr_data(m); });
        attempt([&] { encap::parse_unit_data(m); });
        attempt([&] { cip::decode_request(m); });
        attempt([&] { cip::parse_read_response(cip::decode_response(m)); });
        attempt([&] { cip::split_multi_request(cip::decode_request(m)); });
        attempt([&] { cip::split_multi_response(cip::decode_response(m), 1 + rng() % 8); });
        attempt([&] { cip::unwrap_unconnected_send(cip::decode_request(m)); });
        attempt([&] { cip::parse_forward_open_request(cip::decode_request(m)); });
        attempt([&] { sim.handle_packet(session, encap::build_rr_data(1, m)); });
        attempt([&] { sim.handle_packet(session, m); });
    }
    std::printf("    10000 round trips, %d mismatches; %zu mutated inputs, %d panics\n", mismatches, corpus.size(),
                panics);
    EXPECT_EQ(mismatches, 0);
    EXPECT_EQ(panics, 0);
}

TEST(Acceptance, AC12_ByteOrderIndependence) {
    auto encode_all = [] {
        std::vector<Bytes> out;
        const auto read = cip::build_read_request(tags::to_epath(tags::parse_tag("Local:1:I.Ch0Data[70000]")), 300);
        const auto write = cip::build_write_request({cip::Symbol{"TEST"}}, cip::CipValue::reals({0.002815f, -1e30f}));
        const auto ints = cip::build_write_request({cip::Symbol{"i"}}, cip::CipValue::ints({-2, 0x1234}));
        out.push_back(encap::build_register_session({1, 2, 3, 4, 5, 6, 7, 8}));
        out.push_back(encap::build_rr_data(0xA1B2C3D4, cip::encode_request(cip::wrap_unconnected_send(read, 1))));
        out.push_back(encap::build_unit_data(0x01020304, 0x0506, 0x0708, cip::encode_request(write)));
        out.push_back(cip::encode_request(cip::build_multi_request({read, write, ints})));
        out.push_back(cip::encode_request(cip::build_forward_open({})));
        wire::Writer w;
        w.f32(0.002815f);
        w.u32(0xDEADBEEF);
        out.push_back(w.take());
        return out;
    };
    const auto native = encode_all();
    const auto other = std::endian::native == std::endian::little ? std::endian::big : std::endian::little;
    std::vector<Bytes> flipped;
    cip::CipValue decoded;
    {
        wire::ScopedHostOrder scope(other);
        flipped = encode_all();
        decoded = cip::parse_write_request_data(cip::decode_request(cip::encode_request(
            cip::build_write_request({cip::Symbol{"x"}}, cip::CipValue::reals({0.002815f})))).data);
    }
    EXPECT_EQ(native, flipped);
    EXPECT_EQ(decoded, cip::CipValue::reals({0.002815f}));
    Bytes expected;
    oracle::put32(expected, oracle::real_bits(0.002815f));
    oracle::put32(expected, 0xDEADBEEF);
    EXPECT_EQ(native.back(), expected);
}

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    ::testing::UnitTest::GetInstance()->listeners().Append(new CriterionPrinter);
    return RUN_ALL_TESTS();
}
