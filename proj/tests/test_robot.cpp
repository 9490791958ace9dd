#include <gtest/gtest.h>

#include <set>

#include "emachine/robot.hpp"

using namespace emachine;
using namespace emachine::robot;

namespace {

std::vector<std::string> all_tapes(int max_len) {
  std::vector<std::string> v;
  for (int len = 0; len <= max_len; ++len) {
    for (int mask = 0; mask < (1 << len); ++mask) {
      std::string s;
      for (int i = 0; i < len; ++i) s += (mask >> i & 1) ? ')' : '(';
      v.push_back(s);
    }
  }
  return v;
}

Errc error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::Config;
}

}  // namespace

TEST(World, WriteMoveRead) {
  auto w = TapeWorld::from_input("((");
  Devices d;
  EXPECT_EQ(w.position, 1u);
  auto s = world_step(w, d, {"*", Move::Stay, std::nullopt, false});
  EXPECT_EQ(s.seen, "*");
  s = world_step(w, d, {std::nullopt, Move::Right, std::nullopt, false});
  EXPECT_EQ(s.position, 2u);
  EXPECT_EQ(s.seen, "(");
  world_step(w, d, {std::nullopt, Move::Right, std::nullopt, false});
  s = world_step(w, d, {std::nullopt, Move::Right, std::nullopt, false});
  EXPECT_EQ(s.position, 3u) << "moves clamp at the boundary";
  EXPECT_EQ(s.seen, kBoundary);
}

TEST(World, UtteranceLagsOneCycle) {
  auto w = TapeWorld::from_input("()");
  Devices d;
  EXPECT_EQ(observe(w, d).uttered_feedback, kNone);
  auto s = world_step(w, d, {std::nullopt, Move::Stay, "C", false});
  EXPECT_EQ(s.uttered_feedback, "C");
  s = world_step(w, d, {std::nullopt, Move::Stay, std::nullopt, false});
  EXPECT_EQ(s.uttered_feedback, kNone);
}

TEST(World, RejectsForeignInput) {
  EXPECT_EQ(error_code([] { TapeWorld::from_input("(a)"); }), Errc::Config);
  EXPECT_EQ(error_code([] { TapeWorld::from_input("(#)"); }), Errc::Config);
}

TEST(Teacher, Verdicts) {
  const auto a = teacher_episode("()");
  EXPECT_EQ(a.verdict, "Y");
  EXPECT_EQ(a.final_tape, "Y**#");
  EXPECT_EQ(teacher_episode("(()").verdict, "N");
  EXPECT_EQ(teacher_episode("").verdict, "Y");
  EXPECT_EQ(teacher_episode(")(").verdict, "N");
}

TEST(Teacher, AgreesWithBalanceOnAllShortTapes) {
  for (const auto& t : all_tapes(8)) EXPECT_EQ(teacher_episode(t).verdict, balanced_verdict(t)) << t;
}

TEST(Teacher, FaultOnUnknownSymbol) {
  EXPECT_EQ(error_code([] { teacher_policy({"x", kNone, 1}); }), Errc::TeacherFault);
}

TEST(TeacherProperty, DeterministicAndOneCycleLaw) {
  for (const auto& t : all_tapes(5)) {
    const auto a = teacher_episode(t), b = teacher_episode(t);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t k = 0; k < a.trace.size(); ++k) {
      EXPECT_EQ(a.trace[k].command, b.trace[k].command);
      EXPECT_EQ(a.trace[k].sensory, b.trace[k].sensory);
      if (k > 0) {
        const auto& prev = a.trace[k - 1].command.utter;
        EXPECT_EQ(a.trace[k].sensory.uttered_feedback, prev ? *prev : kNone);
      }
    }
  }
}

TEST(Train, AmHoldsEveryTracePairOnce) {
  Brain brain;
  const auto ep = train_episode(brain, "()");
  std::set<std::pair<codes::SymbolVector, codes::SymbolVector>> pairs;
  for (std::size_t k = 0; k < ep.trace.size(); ++k) {
    const auto prev = k ? std::optional<MotorCommand>(ep.trace[k - 1].command) : std::nullopt;
    const auto x = am_input(ep.trace[k].sensory, prev);
    const auto y = am_output(ep.trace[k].command);
    EXPECT_TRUE(brain.am.program().contains(x, y));
    pairs.insert({x, y});
  }
  EXPECT_EQ(brain.am.program().size(), pairs.size());
  EXPECT_EQ(ep.new_am_rows, pairs.size());
}

TEST(Train, SecondPassAddsNothing) {
  Brain brain;
  train_episode(brain, "(())");
  const auto am = brain.am.program().size(), img = brain.image.program().size();
  const auto again = train_episode(brain, "(())");
  EXPECT_EQ(again.new_am_rows, 0u);
  EXPECT_EQ(again.new_as_rows, 0u);
  EXPECT_EQ(brain.am.program().size(), am);
  EXPECT_EQ(brain.image.program().size(), img);
}

TEST(Train, ShortTapesAreCovered) {
  Brain brain;
  const auto tapes = all_tapes(3);
  train(brain, tapes);
  for (const auto& t : tapes) {
    const auto c = coverage(brain, t);
    EXPECT_TRUE(c.covered) << t << ": " << (c.missing.empty() ? "" : c.missing.front());
  }
}

TEST(Exam, UntrainedBrainIsStuck) {
  Brain brain;
  EXPECT_EQ(error_code([&] { exam_real(brain, "()"); }), Errc::Stuck);
}

TEST(Exam, ReproducesTeacherOnTrainingTape) {
  Brain brain;
  train(brain, {"()", "(())", ")("});
  for (const std::string t : {"()", "(())", ")("}) {
    const auto teacher = teacher_episode(t);
    const auto real = exam_real(brain, t);
    ASSERT_EQ(real.trace.size(), teacher.trace.size()) << t;
    for (std::size_t k = 0; k < real.trace.size(); ++k) {
      EXPECT_EQ(real.trace[k].command, teacher.trace[k].command);
      EXPECT_EQ(real.trace[k].source, Source::Am);
    }
    EXPECT_EQ(real.final_tape, teacher.final_tape);
  }
}

TEST(Exam, GeneralizesWhenCovered) {
  Brain brain;
  train(brain, {"()", "(())", ")("});
  // The real exam only needs AM; the image of '(' at cell 3 is never seen in training.
  for (const auto& m : coverage(brain, "()()").missing) EXPECT_EQ(m.rfind("AM", 0), std::string::npos) << m;
  EXPECT_EQ(exam_real(brain, "()()").verdict, "Y");
}

TEST(Mental, ImageryGapOutsideTraining) {
  Brain brain;
  train(brain, {"()"});
  EXPECT_EQ(error_code([&] { exam_mental(brain, "(("); }), Errc::ImageryGap);
}

TEST(MentalProperty, CoveredTapesAgreeCycleForCycle) {
  Brain brain;
  const auto tapes = all_tapes(6);
  std::vector<std::string> training;
  for (std::size_t k = 0; k < tapes.size(); ++k) {
    if (k % 5 != 3) training.push_back(tapes[k]);
  }
  train(brain, training);
  int checked = 0;
  for (const auto& t : tapes) {
    if (!coverage(brain, t).covered) continue;
    ++checked;
    const auto real = exam_real(brain, t);
    const auto mental = exam_mental(brain, t);
    EXPECT_EQ(real.verdict, balanced_verdict(t)) << t;
    EXPECT_EQ(mental.verdict, real.verdict) << t;
    ASSERT_EQ(mental.trace.size(), real.trace.size()) << t;
    for (std::size_t k = 0; k < real.trace.size(); ++k) {
      EXPECT_EQ(mental.trace[k].command, real.trace[k].command) << t << " cycle " << k;
      EXPECT_EQ(mental.trace[k].sensory_source, SensorySource::Imagery);
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Brain, JsonRoundTripKeepsBehaviour) {
  Brain brain;
  train(brain, {"()", "(())", ")("});
  Brain copy = brain_from_json(nlohmann::json::parse(to_json(brain).dump()));
  EXPECT_EQ(copy.am.program().size(), brain.am.program().size());
  EXPECT_EQ(exam_real(copy, "(())").final_tape, exam_real(brain, "(())").final_tape);
  EXPECT_EQ(exam_mental(copy, "()").verdict, "Y");
}

TEST(TraceCsv, Columns) {
  const auto csv = trace_csv(teacher_episode("()"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "cycle,seen,uttered_fb,cmd_write,cmd_move,cmd_utter,source,sensory_source");
  EXPECT_NE(csv.find(",teacher,world"), std::string::npos);
}
