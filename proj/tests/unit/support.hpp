#pragma once

#include <memory>
#include <string>
#include <vector>

#include "compforest/expression.hpp"
#include "compforest/interaction.hpp"

namespace testing {

inline compforest::Custom custom(const std::string& text) {
    std::vector<compforest::Expression> pieces{compforest::Expression::parse(text)};
    return compforest::Custom{std::make_shared<const compforest::PiecewiseExpression>(std::move(pieces),
                                                                                     std::vector<double>{})};
}

inline compforest::InteractionModel custom_model(const std::string& text) {
    return compforest::build_model(custom(text));
}

}  // namespace testing
