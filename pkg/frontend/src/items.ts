// The seven rating statements, mirrored from the study instrument. The
// backend deliberately exposes no items endpoint (raters get charts and
// tables only), so the instrument text lives here.

export interface SurveyItem {
  readonly id: number;
  readonly text: string;
}

export const SURVEY_ITEMS: readonly SurveyItem[] = [
  {
    id: 1,
    text:
      "The LLM-generated chart accurately displays a title reflecting the data" +
      " depicted in the original CSV data file.",
  },
  {
    id: 2,
    text:
      "The X-axis labels on the LLM-generated chart accurately displays the labels" +
      " depicted in the original CSV data file.",
  },
  {
    id: 3,
    text:
      "The Y-axis labels on the LLM-generated chart accurately displays the labels" +
      " depicted in the original CSV data file.",
  },
  {
    id: 4,
    text:
      "The data points on the LLM-generated chart accurately displays the values" +
      " depicted in the original CSV data file.",
  },
  { id: 5, text: "The LLM-generated chart is easy to read and understand." },
  { id: 6, text: "The LLM-generated chart is visually appealing." },
  {
    id: 7,
    text:
      "Overall, the LLM-generated chart serves its intended purpose in a" +
      " satisfactory manner.",
  },
];

export const SCALE_MIN = 1;
export const SCALE_MAX = 5;
export const SCALE_LABELS: Readonly<Record<number, string>> = {
  1: "Strongly Disagree",
  2: "Disagree",
  3: "Neutral",
  4: "Agree",
  5: "Strongly Agree",
};
