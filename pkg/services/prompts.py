"""Prompt templates for the feature describer and the findings generator.

Builders live with the services that use them; these constants are the only
place the wording is defined.
"""

DESCRIBE_PREAMBLE = "\n".join([
    "You are an expert radiologist specializing in chest radiographs. We're studying neurons in an image neural "
    "network, where each neuron detects specific features in chest X-rays. I've identified the radiology images "
    "that most strongly activate a particular neuron and will provide you with their associated text radiology "
    "reports. Your task is to analyze these reports and determine the common feature that this neuron is detecting.",
    "To arrive at the most accurate and precise explanation of what this neuron is detecting, you must engage in "
    "explicit chain of thought reasoning. Begin by thoroughly examining all provided radiology reports, noting any "
    "patterns or commonalities. Pay close attention to recurring terminology, described anatomical structures, and "
    "consistent pathological findings. Consider how these elements might interrelate to form a singular, distinctive "
    "feature that the neuron could be identifying. Evaluate the context of chest radiographs and consider which "
    "aspects would be most significant or unique within this imaging modality.",
    "As you progress through your analysis, verbalize your thought process. Explain each step of your reasoning, "
    "from initial observations to intermediate conclusions, and finally to your overall assessment. This chain of "
    "thought approach will help ensure a comprehensive and well-reasoned final explanation.",
    "After this detailed analytical process, formulate a single, specific explanation of what the neuron is "
    "detecting. Your explanation should be as precise and fine-grained as possible, avoiding vague or general "
    "statements. Focus on specific features or combinations of features, using 'and' to connect multiple elements "
    "if necessary. Avoid using 'or' to list multiple possibilities. Refrain from explaining the pathology itself "
    "(e.g., avoid statements like \"This feature represents X, which is characterized by...\"). Base your "
    "explanation solely on the information provided in the reports, without additional medical knowledge that "
    "might not be captured by the neuron.",
    "It is crucial that you present your final explanation in the following format:",
    "*This feature represents [your specific, detailed description of what the neuron is detecting].",
    "The asterisk is absolutely essential. Your explanation must begin immediately after the asterisk, without any "
    "additional text, numbering, or preamble. The presence of this asterisk is critical for the proper processing "
    "of your response.",
    "Below are the radiology reports, listed in order of how strongly they activate the neuron. Use these to inform "
    "your analysis and final explanation:",
])

DESCRIBE_REPORT_LINE = "Report number {number}: {report}"

DESCRIPTION_PREFIX = "This feature represents"

REPORT_PREAMBLE = (
    "You are an expert radiologist specializing in chest radiographs. Your task is to write the findings section "
    "for a radiology report based on a chest X-ray image. To assist you, I may provide up to three of the patient's "
    "past radiology reports, if available. These might contain useful information related to the features of the "
    "current scan. I will also give you the indication (reason) for the current X-ray. Additionally, you'll receive "
    "text descriptions of features present in the current X-ray image, along with importance scores for each "
    "feature. Your primary focus should be on producing the findings section for the latest scan, given the "
    "features about that scan. Focus on features with higher importance scores, as these are more prominent in the "
    "image and should be emphasized. Assess the current features, and then judge whether it would be appropriate to "
    "relate them to information in previous scans, if provided. Do not explicitly mention dates and times from "
    "previous reports. Discuss the features present in the X-ray, along with their implications and any deductions "
    "you can make. Your response should constitute the 'findings' section of the radiology report, providing a "
    "comprehensive analysis of the current X-ray. All of the information is provided below:"
)

PRIOR_REPORT_HEADER = "Report number {number}."
PRIOR_REPORT_TIMING = "Report number {number}. This report was written {timing} before the current chest x-ray"

FEATURE_BLOCK = "<feature {number}>\nFeature number {number}. Relative importance score {score:.2f}:\n{description}\n</feature {number}>"

NO_FEATURES_LINE = "No features were detected in the current X-ray image."

REPORT_INSTRUCTIONS = (
    "Using the information provided, compose the findings section of the radiology report. Be aware that some of "
    "the described features may be inaccurate or only loosely related to the actual characteristics present in the "
    "X-ray. When faced with conflicting information, rely on the importance scores or a majority consensus to "
    "determine which features are most likely correct. In your report, refrain from simply listing the features. "
    "Avoid using the word 'feature' entirely in your report. Keep the radiology report brief and to the point."
)

INDICATION_LEAD = "The reason for the current x-ray examination is provided below:"

REPORT_CLOSING = (
    "Now write the findings section. This should be a single contiguous paragraph with the findings of the X-ray "
    "radiology report. No more than 5 to 6 sentences. Be concise and avoid simply listing the features. Do not "
    "respond with any additional text other than the findings. Do not add any concluding statements at the end, "
    "only include findings."
)

NO_FINDINGS_CLOSING = (
    "Now write the findings section. No abnormality was detected in the current X-ray, so state in a single short "
    "paragraph that there are no acute cardiopulmonary findings, relating this to previous scans only if provided. "
    "Do not respond with any additional text other than the findings."
)

NO_FINDINGS_REPORT = "No acute cardiopulmonary findings."
