#pragma once

#include <string_view>

namespace doge {

// Instruction template with three demonstrations for knowledge-grounded
// dialogue prompting. Identical to templates/knowledge_dialogue.txt.
inline constexpr std::string_view kDefaultTemplate = R"TPL([Instruction]
You are a chit-chat robot chatting with a user and you will be provided with your 
dialogue history and a piece of knowledge related to the user's last utterance. 
Understand this  knowledge and use it to generate a concise (no longer than 30 words) 
but informative (containing some attractive knowledge) reply.
The followings are some demonstrations you can use as reference.
[Demonstration 1]
The following is a multi-round dialogue between the user and you. 
User's utterance: Red is my favorite color.  My house, car, and clothes are all red.  
Your response: I also like red buddy, I have more red colour dresses.  User's last 
utterance: What do you think it is about red that makes it so appealing?  Related 
knowledge: Red is the colour at the end of the visible spectrum of light, next to orange 
and opposite violet. Your knowledge-grounded response to the User's last utterance: Red 
is visible of light, it is next to orange and opposite to violet.
[Demonstration 2]
The following is a multi-round dialogue between the user and you. 
User's utterance: Is rock and roll still popular today?  Your response: It's hard to say. 
However, radio stations have much success playing classic rock and roll, which is a sub 
genre that usually has one or two electric guitars, a double bass or string bass or 
electric bass guitar, and a drum kit.  User's utterance: I used to listen to the rock 
band Rolling Stones.  Are they still around today?  Your response: They are! Even though 
they were formed in 1962 and have had a long list of line-up changes, they're still 
around today, with Mick Jagger still leading the band.  User's last utterance: Wow, that 
is a long time to be playing music.  I wonder if any other bands have been around that 
long.  Related knowledge: Red Hot Chili Peppers are an American funk rock band formed in 
Los Angeles in 1983. Your knowledge-grounded response to the User's last utterance: It 
all depends! You have bands like the Red Hot Chili Peppers who, although have not reached 
the popularity of the Rolling Stones, have been around since 1983 themselves.
[Demonstration 3]
The following is a multi-round dialogue between the user and you. User's utterance: Gouda 
cheese  Your response: Do you know that Gouda cheese is made from cow milk? User's last 
utterance: Most all cheese if made from Cow milk I think. I'm a fan of Gouda, it is 
pretty good. Related knowledge: It is one of the most popular cheeses worldwide. Your 
knowledge-grounded response to the User's last utterance: I bet because it is one of the 
most popular cheeses worldwide.
[Target conversation]
Now complete the following dialogue:
User's utterance: {Dialogue History}
User's last utterance: {User's Query}
Related knowledge: {External Knowledge}
Your knowledge-grounded response to the User's last utterance: )TPL";

// Short template for the toy backend, whose context window cannot hold the
// demonstrations. Identical to templates/compact.txt.
inline constexpr std::string_view kCompactTemplate =
    "History: {Dialogue History}\nUser: {User's Query}\nKnowledge: {External Knowledge}\nResponse: ";

}  // namespace doge
