#include "doctest.h"

#include "nbmvc/error.hpp"
#include "nbmvc/value.hpp"

#include <cmath>
#include <limits>

using namespace nbmvc;

TEST_CASE("scalar type tags round-trip") {
    for (auto t : {ScalarType::None, ScalarType::Bool, ScalarType::Int, ScalarType::Float, ScalarType::Text})
        CHECK(parse_type_tag(type_tag(t)) == t);
    CHECK_FALSE(parse_type_tag("list"));
}

TEST_CASE("scalar text form") {
    CHECK(to_text(Scalar{}) == "");
    CHECK(to_text(boolean(true)) == "true");
    CHECK(to_text(integer(-7)) == "-7");
    CHECK(to_text(real(40)) == "40.0");
    CHECK(to_text(real(0.1)) == "0.1");
    CHECK(to_text(text("btn")) == "btn");
}

TEST_CASE("parse_scalar") {
    CHECK(parse_scalar(ScalarType::Bool, "true") == boolean(true));
    CHECK(parse_scalar(ScalarType::Bool, "0") == boolean(false));
    CHECK(parse_scalar(ScalarType::Int, "42") == integer(42));
    CHECK(parse_scalar(ScalarType::Float, "40") == real(40.0));
    CHECK(parse_scalar(ScalarType::Text, "") == text(""));
    CHECK_THROWS_AS(parse_scalar(ScalarType::Int, "4x"), Error);
    CHECK_THROWS_AS(parse_scalar(ScalarType::Bool, "yes"), Error);
    CHECK_THROWS_AS(parse_scalar(ScalarType::Float, "nan"), Error);
}

TEST_CASE("float text form is parseable back exactly") {
    for (double d : {0.0, -0.0, 1e-300, 3.141592653589793, 1e21, -2.5e-7}) {
        auto back = parse_scalar(ScalarType::Float, to_text(real(d)));
        CHECK(std::get<double>(back) == d);
    }
}

TEST_CASE("meta values") {
    MetaValue v(std::int64_t{40});
    CHECK(v.scalar() == integer(40));
    CHECK_FALSE(v.is_list());
    MetaValue list(MetaValue::List{integer(1), integer(2)});
    CHECK(list.is_list());
    CHECK_NOTHROW(list.check());
    MetaValue mixed(MetaValue::List{integer(1), text("a")});
    CHECK_THROWS_AS(mixed.check(), Error);
    MetaValue inf(std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(inf.check(), Error);
    CHECK_THROWS_AS(MetaValue::from_scalar(Scalar{}), Error);
}
