#include <gtest/gtest.h>

#include "gridstealth/port_type.hpp"
#include "gridstealth/xml.hpp"

using namespace gridstealth;

TEST(Xml, ParsesNestedElementsWithLines) {
  auto root = xml::parse("<?xml version=\"1.0\"?>\n<a x=\"1\">\n  <b y=\"2\">text</b>\n</a>\n");
  EXPECT_EQ(root.name, "a");
  EXPECT_EQ(root.attr_or("x", ""), "1");
  ASSERT_EQ(root.children.size(), 1u);
  EXPECT_EQ(root.children[0].line, 3);
  EXPECT_EQ(root.children[0].text, "text");
  EXPECT_FALSE(root.has_attr("y"));
}

TEST(Xml, MalformedInputReportsLine) {
  try {
    xml::parse("<a>\n<b>\n</a>");
    FAIL() << "accepted malformed xml";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "malformed-xml");
    EXPECT_EQ(e.diagnostics().front().line, 3);
  }
}

TEST(Xml, WriterEscapesAndRoundTrips) {
  xml::Writer w;
  w.open("root", {{"q", "a\"b<c&"}});
  w.text_element("t", {}, "x < y & z");
  w.empty("e", {{"k", "v"}});
  w.close("root");
  auto back = xml::parse(w.str());
  EXPECT_EQ(back.attr_or("q", ""), "a\"b<c&");
  EXPECT_EQ(back.children[0].text, "x < y & z");
  EXPECT_EQ(back.children[1].attr_or("k", ""), "v");
}

TEST(PortTypeTags, GrammarAndParsing) {
  EXPECT_TRUE(valid(PortType{"audio/wav", "pcm16", "none"}));
  EXPECT_FALSE(valid(PortType{"Audio/WAV", "pcm16", "none"}));
  EXPECT_FALSE(valid(PortType{"audio/wav", "", "none"}));
  auto t = parse_port_type("text/plain; utf-8 ;asr-tokens");
  ASSERT_TRUE(t);
  EXPECT_EQ(t->to_string(), "text/plain;utf-8;asr-tokens");
  EXPECT_FALSE(parse_port_type("text/plain;utf-8"));
}
