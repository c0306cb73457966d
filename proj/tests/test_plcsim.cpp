#include <gtest/gtest.h>

#include "eip/errors.hpp"
#include "eip/tags.hpp"
#include "oracle.hpp"
#include "sim_support.hpp"

using namespace eip;
using simtest::Driver;
using simtest::store_from;

namespace {

const char* kTags = R"(
# demo
TEST REAL[1] = 0.002815246582031
counts DINT[10] = 1,2,3
flags DINT[11]
small SINT[4] = -1,2
big REAL[200]
)";

cip::CipRequest read(const std::string& tag, std::uint16_t count = 1) {
    return cip::build_read_request(tags::to_epath(tags::parse_tag(tag)), count);
}

}  // namespace

TEST(TagFile, ParsesTypesAndValues) {
    const auto store = store_from(kTags);
    EXPECT_EQ(store.tags().size(), 5u);
    const auto* counts = store.find("counts");
    ASSERT_TRUE(counts);
    EXPECT_EQ(counts->size(), 10u);
    EXPECT_EQ(counts->as_int(2), 3);
    EXPECT_EQ(counts->as_int(9), 0);
    EXPECT_EQ(store.find("small")->as_int(0), -1);
    EXPECT_EQ(store.find("TEST")->raw(0), 0x3B388000u);
}

TEST(TagFile, ErrorsNameTheLine) {
    try {
        store_from("A DINT[2]\nB FLOAT[1]\n");
        FAIL();
    } catch (const UsageError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(store_from("A DINT[2] = 1,2,3"), UsageError);
    EXPECT_THROW(store_from("A SINT[1] = 300"), UsageError);
    EXPECT_THROW(store_from("A[3] DINT[2]"), UsageError);
}

TEST(Faults, Parse) {
    const auto f = plcsim::parse_faults("refuse-connections,drop-after=3,latency-ms=5,status=4C:08");
    EXPECT_TRUE(f.refuse_connections);
    EXPECT_FALSE(f.refuse_sessions);
    EXPECT_EQ(f.drop_after_requests, 3u);
    EXPECT_EQ(f.latency, std::chrono::milliseconds(5));
    EXPECT_EQ(f.status_injection.at(0x4C), 0x08);
    EXPECT_THROW(plcsim::parse_faults("bogus"), UsageError);
    EXPECT_THROW(plcsim::parse_faults("drop-after=x"), UsageError);
}

TEST(Simulator, RegisterAssignsDistinctHandles) {
    plcsim::Simulator sim(store_from(kTags));
    Driver a(sim), b(sim);
    a.register_session();
    b.register_session();
    EXPECT_NE(a.handle, 0u);
    EXPECT_NE(a.handle, b.handle);
}

TEST(Simulator, RefusedSession) {
    plcsim::FaultPlan f;
    f.refuse_sessions = true;
    plcsim::Simulator sim(store_from(kTags), f);
    Driver d(sim);
    const auto out = d.send(encap::build_register_session());
    ASSERT_TRUE(out.reply);
    EXPECT_THROW(encap::parse_register_reply(encap::decode_packet(*out.reply)), SessionError);
}

TEST(Simulator, RequestsBeforeRegisterAreRejected) {
    plcsim::Simulator sim(store_from(kTags));
    Driver d(sim);
    const auto out = d.send(encap::build_rr_data(0x1234, cip::encode_request(read("TEST"))));
    ASSERT_TRUE(out.reply);
    EXPECT_EQ(oracle::header(*out.reply).status, encap::status::kInvalidSession);
}

TEST(Simulator, IdentityProductName) {
    plcsim::Simulator sim(store_from(kTags));
    Driver d(sim);
    d.register_session();
    const auto reply = d.rr(cip::encode_request(cip::build_get_attribute_single(1, 1, 7)));
    EXPECT_EQ(reply[0], 0x8E);
    EXPECT_EQ(reply[4], 12);
    EXPECT_EQ(std::string(reply.begin() + 5, reply.end()), "1756-ENET/A ");
}

TEST(Simulator, ReadRealMatchesHexDump) {
    plcsim::Simulator sim(store_from(kTags));
    Driver d(sim);
    d.register_session();
    const auto bytes = d.rr(cip::encode_request(cip::wrap_unconnected_send(read("TEST"), 0)));
    EXPECT_EQ(bytes, (Bytes{0xCC, 0x00, 0x00, 0x00, 0xCA, 0x00, 0x00, 0x80, 0x38, 0x3B}));
}

TEST(Simulator, WriteThenRead) {
    plcsim::Simulator sim(store_from(kTags));
    Driver d(sim);
    d.register_session();
    const auto w = d.routed(cip::build_write_request(tags::to_epath(tags::parse_tag("counts[4]")),
                                                     cip::CipValue::dints({40, 50})));
    EXPECT_EQ(w.service, 0xD3);
    EXPECT_TRUE(w.ok());
    EXPECT_EQ(cip::parse_read_response(d.routed(read("counts[3]", 3))), cip::CipValue::dints({0, 40, 50}));
    EXPECT_EQ(sim.get_tag("counts[5]"), cip::CipValue::dints({50}));
}

TEST(Simulator, StatusCodes) {
    plcsim::Simulator sim(store_from(kTags));
    Driver d(sim);
    d.register_session();
    auto r = d.routed(read("nosuch"));
    EXPECT_EQ(r.general_status, 0x05);
    r = d.routed(read("counts[9]", 2));
    EXPECT_EQ(r.general_status, 0xFF);
    EXPECT_EQ(r.extended_status, (std::vector<std::uint16_t>{0x2105}));
    r = d.routed(cip::build_write_request({cip::Symbol{"counts"}}, cip::CipValue::reals({1})));
    EXPECT_EQ(r.general_status, 0xFF);
    EXPECT_EQ(r.extended_status, (std::vector<std::uint16_t>{0x2107}));
    r = d.routed(cip::CipRequest{0x4B, {cip::Symbol{"counts"}}, {}});
    EXPECT_EQ(r.general_status, 0x08);
    EXPECT_EQ(r.service, 0xCB);
    r = d.routed(read("TEST"), 5);  // no processor in slot 5
    EXPECT_EQ(r.general_status, 0x01);
}

TEST(Simulator, StatusInjection) {
    plcsim::Simulator sim(store_from(kTags), plcsim::parse_faults("status=4C:08"));
    Driver d(sim);
    d.register_session();
    EXPECT_EQ(d.routed(read("TEST")).general_status, 0x08);
}

TEST(Simulator, MalformedCarrierClosesSession) {
    plcsim::Simulator sim(store_from(kTags));
    Driver d(sim);
    d.register_session();
    encap::Header h;
    h.command = encap::command::kSendRRData;
    h.session_handle = d.handle;
    const Bytes junk{0, 0, 0, 0, 0, 0, 7, 0};
    EXPECT_TRUE(d.send(encap::encode_packet(h, junk)).close);
}

TEST(Simulator, MultiRequestMixedResults) {
    plcsim::Simulator sim(store_from(kTags));
    Driver d(sim);
    d.register_session();
    const auto multi = cip::build_multi_request({read("TEST"), read("nosuch"), read("counts[1]", 2)});
    const auto reply = d.routed(multi);
    EXPECT_EQ(reply.service, 0x8A);
    EXPECT_EQ(reply.general_status, 0x1E);
    const auto parts = cip::split_multi_response(reply, 3);
    EXPECT_TRUE(parts[0].ok());
    EXPECT_EQ(parts[1].general_status, 0x05);
    EXPECT_EQ(cip::parse_read_response(parts[2]), cip::CipValue::dints({2, 3}));
}

class LimitTest : public ::testing::TestWithParam<std::size_t> {};

TEST_P(LimitTest, EnforcedOnRequestsAndReplies) {
    const auto limit = GetParam();
    auto store = store_from(kTags);
    store.limit = limit;
    plcsim::Simulator sim(std::move(store));
    Driver d(sim);
    d.register_session();

    // Reply sizes 6 + 4n straddling the limit.
    for (std::uint16_t n = 100; n <= 130; ++n) {
        const auto bytes = d.rr(cip::encode_request(cip::wrap_unconnected_send(read("big", n), 0)));
        EXPECT_LE(bytes.size(), limit) << n;
        const auto resp = cip::decode_response(bytes);
        if (6u + 4u * n <= limit) {
            EXPECT_TRUE(resp.ok()) << n;
        } else {
            EXPECT_EQ(resp.general_status, 0x11) << n;
        }
    }
    // Requests: a Multi-Request padded past the limit.
    std::vector<cip::CipRequest> reads{read("TEST")};
    while (cip::encode_request(cip::build_multi_request(reads)).size() <= limit) reads.push_back(read("TEST"));
    EXPECT_EQ(d.routed(cip::build_multi_request(reads)).general_status, 0x15);
    reads.pop_back();
    EXPECT_NE(d.routed(cip::build_multi_request(reads)).general_status, 0x15);
}

INSTANTIATE_TEST_SUITE_P(Limits, LimitTest, ::testing::Values(500u, 504u, 511u));

TEST(Simulator, ForwardOpenAndUnitData) {
    plcsim::Simulator sim(store_from(kTags));
    Driver d(sim);
    d.register_session();
    cip::ForwardOpenParams p;
    p.proposed_t_to_o_id = 0x77;
    const auto reply = cip::decode_response(d.rr(cip::encode_request(cip::build_forward_open(p))));
    const auto grant = cip::parse_forward_open_reply(reply);
    EXPECT_EQ(grant.t_to_o_id, 0x77u);
    EXPECT_EQ(sim.open_connections(), 1u);

    const auto out = d.send(encap::build_unit_data(d.handle, grant.o_to_t_id, 1, cip::encode_request(read("TEST"))));
    const auto packet = encap::decode_packet(*out.reply);
    const auto unit = encap::parse_unit_data(packet.payload);
    EXPECT_EQ(unit.connection_id, 0x77u);
    EXPECT_EQ(unit.sequence, 1);
    EXPECT_NEAR(cip::parse_read_response(cip::decode_response(unit.cip)).as_real(0), 0.00281525, 1e-8);

    const auto bad = d.send(encap::build_unit_data(d.handle, 0x9999, 2, cip::encode_request(read("TEST"))));
    EXPECT_NE(oracle::header(*bad.reply).status, 0u);

    const auto closed = cip::decode_response(d.rr(cip::encode_request(cip::build_forward_close(p))));
    EXPECT_TRUE(closed.ok());
    EXPECT_EQ(sim.open_connections(), 0u);
}

TEST(Simulator, RefusedConnection) {
    plcsim::Simulator sim(store_from(kTags), plcsim::parse_faults("refuse-connections"));
    Driver d(sim);
    d.register_session();
    const auto reply = cip::decode_response(d.rr(cip::encode_request(cip::build_forward_open({}))));
    EXPECT_FALSE(reply.ok());
}

TEST(Simulator, ServiceLogRecordsElementRanges) {
    plcsim::Simulator sim(store_from(kTags));
    Driver d(sim);
    d.register_session();
    d.routed(read("counts[2]", 5));
    const auto log = sim.service_log();
    ASSERT_EQ(log.size(), 1u);
    EXPECT_EQ(log[0].service, 0x4C);
    EXPECT_EQ(log[0].tag, "counts");
    EXPECT_EQ(log[0].first_element, 2u);
    EXPECT_EQ(log[0].element_count, 5u);
}
