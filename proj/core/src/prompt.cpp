#include "localguard/prompt.hpp"

#include <stdexcept>

namespace localguard {
namespace {

constexpr std::string_view kContext =
    "Context: You are helping to identify if a given Singlish comment is toxic by understanding "
    "its meaning and evaluating it on seven criteria.\n"
    "\n"
    "Some examples of Singaporean slang and their definitions are provided below.\n"
    "ghey: male homosexual, usually in a derogatory way\n"
    "tiong: people from China, may be in a derogatory way\n"
    "ceca: people from India, usually in a derogatory way\n"
    "bbfa: people who are overweight and resigned to being alone\n"
    "yalam: people who are ethnically Malay\n"
    "fap: masturbation\n"
    "piak: sexual intercourse\n"
    "syt: sexy young thing\n"
    "ZG or zao geng: accidentally showing underwear in public, usually for women\n"
    "nnp: nipples\n"
    "amdk: sarcastic reference to Caucasians being superior\n"
    "siao: crazy\n"
    "knn: vulgar word\n"
    "kns: vulgar word\n"
    "sot: Singlish for \"shot\", meaning no longer functional\n";

constexpr std::string_view kTask =
    "Task: Iterate through the list of seven criteria below and determine whether the Singlish "
    "comment below, which includes Singaporean terms, fulfil any of the seven criteria below. "
    "You should be a more liberal labeller - if something has a 50% chance of being toxic, you "
    "should label it as such. You also need to take into account the Singlish terms, "
    "vulgarities, and unique racial, religious, and cosmopolitan context.\n"
    "a. hateful: Content that expresses, incites, or promotes hate based on race, gender, "
    "ethnicity, religion, nationality, sexual orientation, disability status, or caste. Hateful "
    "content aimed at non-protected groups (e.g., chess players) is harrassment. Hateful content "
    "that also includes violence or serious harm towards the targeted group based on race, "
    "gender, ethnicity, religion, nationality, sexual orientation, disability status, or caste.\n"
    "b. harassment: Content that expresses, incites, or promotes harassing language towards any "
    "target/individual. Harassment content that also includes violence or serious harm towards "
    "any target/individual.\n"
    "c. encouraging public harm: Content that promotes, facilitates, or encourages harmful "
    "public acts, vice or organised crime.\n"
    "d. encouraging self-harm: Content that promotes, encourages, or depicts acts of self-harm, "
    "such as suicide, cutting, and eating disorders. Content that encourages performing acts of "
    "self-harm, such as suicide, cutting, and eating disorders, or that gives instructions or "
    "advice on how to commit such acts.\n"
    "e. sexual: Content meant to arouse sexual excitement, such as the description of sexual "
    "activity, or that promotes sexual services (excluding sex education and wellness). Sexual "
    "content that includes an individual who is under 18 years old.\n"
    "f. toxic: Content that is rude, disrespectful, or profane, including the use of slurs. A "
    "very hateful, aggressive, disrespectful comment or otherwise very likely to make a user "
    "leave a discussion or give up on sharing their perspective.\n"
    "g. violent: Content that depicts death, violence, or physical injury.\n";

constexpr std::string_view kCot =
    "For each criterion, do the following:\n"
    "1. Consider the Singlish comment below and determine whether the comment fulfills the "
    "criterion.\n"
    "2. Provide a \"Yes\" or \"No\" label.\n"
    "3. Provide a reason for the label.\n"
    "4. Output the answers strictly in the following JSON format, replacing <criterion> with the "
    "criteria listed below:\n"
    "{\n"
    "    \"<criterion>\": {\n"
    "        \"label\": \"Yes\" / \"No\",\n"
    "        \"reason\": \"<reason>\"\n"
    "    }\n"
    "}\n";

constexpr std::string_view kFewshot =
    "Here are some examples of Singlish comments and which criteria they fulfill.\n"
    "\n"
    "Singlish comment: \"I thinking of making a school girl ZG/upskirt video, something like the "
    "schoolgirl above, then open legs show panties, or even pulling up her skirt let ppl beo. but "
    "donno will kena complain anot. Youtube alot of cheesepie ppl like to report for very minor "
    "things...\"\n"
    "Criteria fulfilled: encouraging public harm, sexual, toxic\n"
    "\n"
    "Singlish comment: \"yes. I want the judge to sentence the max jail term and caning. plus a "
    "bonus of they have to rape each other monthly. The loser will have to be rape again by "
    "another inmate.\"\n"
    "Criteria flagged: harassment, toxic, encouraging public harm, sexual\n"
    "\n"
    "Singlish comment: \"Hi ib, u 1 day don't kanna fug u don't feel good si bo? Knnbccb\"\n"
    "Criteria flagged: toxic\n"
    "\n"
    "Singlish comment: \"wah piang eh there ish something insai every man dream on piaking girls "
    "in school uniform mens\"\n"
    "Criteria flagged: sexual\n"
    "\n"
    "Singlish comment: \"\"nowadays pple dont have much integrity 1 la wont suicide 1. they will "
    "treat it lightly and say so be it\"\n"
    "Criteria flagged: encouraging self harm\n"
    "\n"
    "Singlish comment: \"Pray tell me why ceca cannot break through in other Asian economies like "
    "Korea, Japan, Taiwan, China if they are so good and compete fair and square? They only "
    "thrive in Singapore simply because ceca and our gahmen close 1 eye to their unfair hiring. "
    "By way I not pro singkee, since I migrate. Juz 2 cents\"\n"
    "Criteria flagged: hateful\n"
    "\n"
    "Singlish comment: \"The beach road tiong guy slashed his wife during broad daylight with "
    "full intention of killing her. Even severing her hand off and blinded her in one eye. It is "
    "over relationship issue as well like this case.\"\n"
    "Criteria flagged: violent\n";

constexpr std::string_view kClosing =
    "Remember to return the output in a JSON format. The Singlish comment for your evaluation "
    "is: <insert statement here>\n";

}  // namespace

const PromptTemplate& PromptTemplate::standard() {
  static const PromptTemplate tmpl{std::string(kContext), std::string(kTask), std::string(kCot),
                                   std::string(kFewshot), std::string(kClosing)};
  return tmpl;
}

PromptTemplate::PromptTemplate(std::string context_block, std::string task_block,
                               std::string cot_block, std::string fewshot_block,
                               std::string closing)
    : context_(std::move(context_block)),
      task_(std::move(task_block)),
      cot_(std::move(cot_block)),
      fewshot_(std::move(fewshot_block)),
      closing_(std::move(closing)) {
  const auto first = closing_.find(kPlaceholder);
  if (first == std::string::npos || closing_.find(kPlaceholder, first + 1) != std::string::npos) {
    throw std::invalid_argument("prompt closing must contain the placeholder exactly once");
  }
}

std::string PromptTemplate::render_template(PromptToggles toggles) const {
  std::string out;
  auto append = [&out](const std::string& block) {
    out += block;
    out += '\n';
  };
  if (toggles.context) append(context_);
  append(task_);
  if (toggles.cot) append(cot_);
  if (toggles.fewshot) append(fewshot_);
  out += closing_;
  return out;
}

std::string PromptTemplate::render(std::string_view text, PromptToggles toggles) const {
  if (text.empty()) throw std::invalid_argument("render_prompt: text is empty");
  std::string out = render_template(toggles);
  // The placeholder occurs once, inside the closing line at the tail.
  const auto pos = out.rfind(kPlaceholder);
  out.replace(pos, kPlaceholder.size(), text);
  return out;
}

std::string render_prompt(std::string_view text, PromptToggles toggles) {
  return PromptTemplate::standard().render(text, toggles);
}

}  // namespace localguard
