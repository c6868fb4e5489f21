"""Prompt templates used across the pipeline stages.

Templates are filled with ``str.format``; double braces are literal JSON
braces in the instructions sent to the model.
"""
from __future__ import annotations

import json
import re

from .errors import ParseError

SEGMENT_ANALYSIS_PROMPT = """You are analysing a cooking video.

Please extract information into three clearly labelled bullet-point lists, based strictly on what is visually present in the video frames.

Respond only with the following three sections in this exact order:

Ingredients:
- List all visible ingredients being used (e.g., chopped onions, turmeric powder, rice).

Utensils:
- List all visible cooking tools, vessels, or utensils (e.g., knife, pressure cooker, ladle).

Actions:
- Describe each distinct cooking action as a verb-noun phrase (e.g., chopping onions, frying spices, stirring curry).

Important rules:
- Do NOT include any summary, explanation, or extra commentary.
- Only include items that are visible or implied in the visuals.
- Avoid repeating the same item unless used in a different context.
- Use consistent and specific terms.
"""

CLUSTER_SPLIT_PROMPT = """You are analysing cooking actions for a biryani recipe classifier. Below is a set of {action_count} similar cooking actions that have been grouped:

{actions_str}

Question: Should these actions be split into multiple distinct action classes, or are they similar enough to remain as one group?

Consider:
- Are there distinct cooking techniques or steps represented?
- Would separating them improve classification accuracy for biryani cooking?
- Are some actions fundamentally different despite semantic similarity?

Respond with a JSON object containing only:
{{
    "should_split": true/false,
}}
"""

ACTION_VERIFICATION_PROMPT = """You are an expert in analysing cooking videos. Your task is to determine if a specific action is happening in the provided video frames.

The action to verify is: '{action}'

If any part of the action is clearly or partially visible—e.g., if the action is “adding turmeric and milk” but only turmeric is visible—answer “yes”.

Only answer “no” if none of the described actions is visible.

Do not explain. Respond with a single word: “yes” or “no”.
"""

ACTION_DIFF_PROMPT = """I am analysing two sets of photos ({total_frames} total) of someone performing the same biryani cooking action:

"{action}".

Video A: Photos {clip1_range}
Video B: Photos {clip2_start}-{clip2_end}

The specific difference to check is: "{query_string}".
This means I want to determine if Video A shows more of this characteristic compared to Video B.

{importance_context}

Question: Based on these frames, which video shows more of this difference?
(a) Video A
(b) Video B
(c) They look similar, or it's not clear
(d) The videos seem to be irrelevant to the query

Be careful: look at the entire set of frames for each video.
If you are not confident or if the difference is very minor, choose (c).

Important Guidelines:
- Choose (a) if Video A clearly shows more of the difference than Video B
- Choose (b) if Video B clearly shows more of the difference than Video A
- Choose (c) if you cannot confidently distinguish between them or they appear similar
- Choose (d) if the videos do not relate to the query at all / the action shown is completely different to the cooking action

Return JSON:
{{
    "answer": "a|b|c|d",
    "confidence": 1-5,
    "difference_visible": true/false,
    "explanation": "Detailed explanation of what you observed"
}}
"""

# The variation proposer's output contract is ours: strict JSON with bounded
# cardinalities so downstream stages can validate mechanically.
VARIATION_PROPOSER_PROMPT = """You are analysing how a single biryani cooking action can vary between different cooks and regional styles.

The action class is: "{action_class}"

Task:
1. Propose 2-3 plausible variations in how this action might be performed. Each variation must be visually significant, i.e. detectable from video frames alone.
2. Break the action down into 2-4 ordered sub-action stages.
3. For every variation, list the sub-action stages during which it would be most visually detectable.

Return JSON only, with this exact shape:
{{
    "variations": ["...", "..."],
    "sub_actions": ["...", "..."],
    "mapping": {{"<variation>": ["<sub_action>", "..."]}}
}}
"""

VIDEO_CAPTION_PROMPT = """Generate a detailed and accurate description of a cooking video segment.
Use the following guidelines to craft a clear and complete narrative:

1. Describe key visual elements such as ingredients, utensils, appliances, and the appearance of food at different stages of preparation.
2. Focus on the sequence of actions performed by the cook, including preparation steps (e.g., chopping, mixing, frying), cooking techniques, and transformations in the food (e.g., colour changes, texture changes, boiling).
3. Highlight interactions between the cook and the ingredients, as well as gestures or tools used.
4. Emphasise the order of events, transitions between cooking stages, and any significant visual or temporal cues that indicate progress in the recipe.
5. Ensure the description is thorough yet clear, capturing the essential visual and procedural aspects of the segment to help the viewer understand what is being cooked and how.
"""

VIDEO_SUMMARY_PROMPT = """We split a cooking video into segments and extracted detailed descriptions for each segment. The descriptions for all segments are listed below, in the order they appear in the video. For example, 'CHUNK: 1' corresponds to the first video segment.

Generate a detailed, step-by-step, and visually rich description of the entire cooking video as a single coherent paragraph, based on all the provided captions. Make sure not to lose any important information.
\"\"\"
{segment_descriptions}
\"\"\"

Use the following instructions to create a clear, complete, and engaging cooking narrative:

1. Focus on describing key visual details such as the appearance and colours of ingredients, textures, cooking methods, utensils used, hand movements, and how ingredients are combined or transformed during the process.
2. Preserve the sequence of cooking actions — describe the preparation steps in the order they happen, ensuring the flow matches the progression shown in the captions.
3. Highlight important details like quantities shown, specific types of ingredients (e.g., green chilli, rice, ginger garlic paste, potatoes), notable textures (e.g., moist, oily, tender), and garnishing or plating details.
4. Use your reasoning to combine and organise information from all captions into one clear, thorough description. Remove unnecessary repetition and ignore any conflicting or irrelevant details.
5. Do not mention that the information comes from captions. Present it as a natural, direct description of the video.
6. Keep it visually descriptive yet easy to understand, almost like explaining the video to someone who can't watch it.
7. Finally, use your common sense to conclude what dish is being prepared and summarise how the video showcases its preparation. If the video ends with plating or serving, describe that presentation too.
"""

MULTIMODAL_SUMMARY_PROMPT = """We have split a cooking video into visual segments and extracted detailed descriptions from the video frames for each segment. Separately, we also generated a full transcript of the audio narration spoken in the video.

Your task is to produce a comprehensive, visually and verbally rich summary of the entire cooking video by carefully combining information from both the visual descriptions and the audio transcript.

Video description from visual frames:
\"\"\"
{video_description}
\"\"\"

Transcript of the audio narration:
\"\"\"
{transcript}
\"\"\"

Use the following instructions to create a clear, complete, and engaging cooking video summary:

1. Use the video summaries from frames to describe key visual details such as the appearance and colours of ingredients, textures, cooking methods, utensils, hand movements, how ingredients are layered or transformed, and plating or serving scenes.
2. Use the transcript of the audio narration to incorporate spoken explanations, cooking tips, quantities, and verbal emphasis on techniques or ingredient choices.
3. Ensure the cooking steps are described in the correct sequence, matching the flow shown across the video segments and the spoken instructions.
4. Highlight important specifics like ingredient types (e.g., green chillies, basmati rice, ginger garlic paste, bone-in chicken), notable textures (e.g., golden fried onions, oily masala, tender meat), quantities or approximate amounts mentioned, and final garnishing or plating details.
5. Merge and organise all this information into one clear, thorough, and engaging description, removing unnecessary repetition and ignoring conflicting or irrelevant details.
6. Do not mention captions, transcripts, or segments explicitly. Present it as if you are naturally describing what is happening in the video.
7. Keep the narrative vivid and easy to understand, as if explaining the video to someone who cannot watch it.
8. Conclude by summarising what dish is being prepared and how the video showcases its preparation, including the final presentation if shown.
"""

EASY_QA_PROMPT = """Video segment description:

\"\"\"
{segment_description}
\"\"\"

Answer the following clearly:

1. What are the ingredients shown in this segment?
2. What are the utensils shown in this segment?
3. What are the cooking actions performed in this segment?
"""

EASY_QA_QUESTIONS = (
    "What are the ingredients shown in this segment?",
    "What are the utensils shown in this segment?",
    "What are the cooking actions performed in this segment?",
)

MEDIUM_QA_TEMPLATES = """1. What are the primary ingredients used in this recipe?
   e.g., chicken, rice, yoghurt, spices, onions, tomatoes
2. In what order are the ingredients added during cooking?
   e.g., oil -> spices -> onions -> meat -> tomatoes -> yogurt
3. Which spices or seasonings are used in this dish?
   e.g., cumin seeds, coriander powder, garam masala, turmeric, salt
4. What kind of meat is used in the recipe?
   e.g., goat, chicken, fish, lamb, beef, none
5. What is the first step shown in the video?
   e.g., rinsing and soaking the rice, marinating the meat
6. What is the last step before serving?
   e.g., garnishing with fresh coriander and fried onions
7. How is the meat prepared before cooking?
   e.g., marinated with yoghurt, turmeric, and chilli powder, layered with meat
8. What type of pan or vessel is used to cook this dish?
   e.g., a wide heavy-bottomed metal pot, clay pot, pressure cooker
9. How long is the rice cooked for?
   e.g., approximately 15 minutes until tender
10. Approximately how long does it take to prepare this entire dish?
   e.g., around 45 minutes total
11. What does the final dish look like?
   e.g., orange-red rice with chicken pieces and green garnish
12. What is used to garnish the dish before serving?
   e.g., chopped coriander leaves, fried onions, lemon slices
13. Does the dish appear to be spicy?
   e.g., yes, it looks spicy due to the visible red chilli oil
14. When is the rice mixed with the meat or gravy?
   e.g., after the meat is cooked for 15 minutes
15. Is the dish served with any accompaniments?
   e.g., onion raita, boiled eggs, salad
"""

MEDIUM_QA_PROMPT = """You are an expert in analysing cooking videos, with extensive knowledge of culinary techniques, ingredients, and food presentation across various regional cuisines in India.

You are provided with a detailed textual description of the cooking video and the full transcript of the spoken narration. This data includes step-by-step cooking processes, mentions of ingredients, utensils, cooking durations, and visual cues — but you do not have access to the actual video.

Task:

- Identify and describe the key cooking processes, ingredients, and presentation details discussed in the textual description and summary. (The key cooking process refers to the main focus of the video that is highlighted in the provided text.)

- Generate relevant Question-Answer (QA) pairs by carefully analysing the textual description and summary of the cooking video.

- In addition to using the provided template questions, feel free to create additional QA pairs that are contextually appropriate based on the content.

Below is a set of template questions for forming QA pairs:
(Adapt these or create new ones depending on the content.)

\"\"\"
{templates}
\"\"\"

Instructions:

- DO NOT mention the video summary or transcript directly when answering the questions. Avoid phrases like: “based on the description,” “according to the text,” “as mentioned,” or references to captions that imply the answer was derived from the provided text. Instead, present the information as if it is directly inferred from watching the video.

- Do not explain or justify how the answer was obtained.

- You may choose to omit details that seem irrelevant to the cooking process or final dish.

- Keep all answers concise, and highlight important keywords using bold formatting.

- If a particular question does not apply to the video, simply do not generate a QA pair for it.

- Focus on content directly relevant to the cooking process, ingredients, or presentation. Ignore unrelated background commentary.

Output Format:
{{
  "Summary": "",
  "QA_pairs": [
    {{"Q": "", "A": ""}},
    {{"Q": "", "A": ""}},
    {{"Q": "", "A": ""}},
    {{"Q": "", "A": ""}}
  ]
}}

Video description:

\"\"\"
{video_description}
\"\"\"

Transcript:

\"\"\"
{transcript}
\"\"\"
"""

HARD_QA_TEMPLATES = """1. Which ingredient is common across all the recipes shown?
   e.g., onions are used in all three dishes
2. Which dish uses the highest variety of spices?
   e.g., the Hyderabad biryani uses 7 different spices, more than the others
3. Which recipe takes the longest time to prepare?
   e.g., the Lucknow biryani takes approximately 1 hour
4. Which of the recipes do not include yoghurt as an ingredient?
   e.g., only the Ambur biryani skips yoghurt
5. In which video is rice boiled separately before adding to the meat, unlike in the others?
   e.g., the Lucknow recipe
6. Which recipe appears the spiciest?
   e.g., the Andhra biryani looks deep red from heavy chilli usage
7. In which video does the cook add the meat later in the cooking process compared to the others?
   e.g., the Kerala biryani adds meat after vegetables
8. Which videos are the most different from each other?
   e.g., the Kerala and Hyderabad biryanis differ greatly in cooking method and garnish
9. Which videos are the most similar to each other?
   e.g., the Ambur and Tamil Nadu biryanis are nearly identical
"""

HARD_QA_PROMPT = """You are an expert in analysing cooking videos, with extensive knowledge of culinary techniques, ingredients, and food presentation across various regional cuisines in India.

You are provided with textual summaries of multiple cooking videos. These summaries include step-by-step actions, mentions of ingredients, utensils, and visual cues — but you do not have access to the actual videos themselves.

Task:

- Carefully compare, contrast, and synthesise the details across these multiple videos to identify key differences, similarities, and unique aspects. This includes analysing cooking processes, ingredients, preparation times, spice usage, visual appearance, and sequencing of steps.

- Generate high-level, challenging Question-Answer (QA) pairs that require reasoning across these multiple videos, not just describing a single video.

- Use the provided set of question templates to guide your QA generation. You may also create additional multi-video QA pairs if they are insightful.

Below is a set of template questions for forming QA pairs:
(Adapt these or create new ones depending on the content.)

\"\"\"
{templates}
\"\"\"

Instructions:

- Do not mention the video summaries or textual descriptions directly when answering the questions. Avoid phrases like: “based on the description,” “according to the text,” “as mentioned,” or references to captions that imply the answer was derived from the provided summaries. Instead, present the information as if it is directly inferred from watching the videos.

- Do not explain or justify how the answer was obtained.

- Keep all answers concise, and highlight important keywords using bold formatting.

- If a particular question does not apply to this set of videos, simply do not generate a QA pair for it.

- Focus on content directly relevant to the cooking processes, ingredients, or comparative aspects. Ignore unrelated background commentary.

Output Format:
{{
  "Summary": "",
  "QA_pairs": [
    {{"Q": "", "A": ""}},
    {{"Q": "", "A": ""}},
    {{"Q": "", "A": ""}},
    {{"Q": "", "A": ""}}
  ]
}}

Video summaries:

\"\"\"
{video_summaries}
\"\"\"
"""

_JSON_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def parse_strict_json(text: str) -> dict:
    """Parse a model response expected to be a single JSON object.

    Accepts an optional markdown code fence around the object and a
    trailing comma before the closing brace (both common model quirks);
    anything else fails.
    """
    candidate = text.strip()
    fence = _JSON_FENCE.search(candidate)
    if fence:
        candidate = fence.group(1).strip()
    candidate = re.sub(r",\s*([}\]])", r"\1", candidate)
    try:
        obj = json.loads(candidate)
    except json.JSONDecodeError as exc:
        raise ParseError(f"response is not strict JSON: {exc.msg}", offset=exc.pos) from exc
    if not isinstance(obj, dict):
        raise ParseError("response JSON must be an object")
    return obj
