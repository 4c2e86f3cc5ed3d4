//! The Porter stemming algorithm, original rule set.
//!
//! Words that are not pure ASCII lowercase letters, and words of two letters
//! or fewer, are returned unchanged.

pub fn stem(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut s = Stemmer {
        b: word.as_bytes().to_vec(),
        j: 0,
    };
    s.step1ab();
    if s.b.len() > 1 {
        s.step1c();
        s.step2();
        s.step3();
        s.step4();
        s.step5();
    }
    String::from_utf8(s.b).expect("ascii")
}

struct Stemmer {
    b: Vec<u8>,
    /// End of the stem (exclusive) after a successful `ends` match.
    j: usize,
}

impl Stemmer {
    /// Whether `b[i]` is a consonant.
    fn cons(&self, i: usize) -> bool {
        match self.b[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.cons(i - 1),
            _ => true,
        }
    }

    /// Number of VC sequences in `b[..j]`.
    fn m(&self) -> usize {
        let end = self.j;
        let mut n = 0;
        let mut i = 0;
        loop {
            if i >= end {
                return n;
            }
            if !self.cons(i) {
                break;
            }
            i += 1;
        }
        i += 1;
        loop {
            loop {
                if i >= end {
                    return n;
                }
                if self.cons(i) {
                    break;
                }
                i += 1;
            }
            i += 1;
            n += 1;
            loop {
                if i >= end {
                    return n;
                }
                if !self.cons(i) {
                    break;
                }
                i += 1;
            }
            i += 1;
        }
    }

    fn vowel_in_stem(&self) -> bool {
        (0..self.j).any(|i| !self.cons(i))
    }

    /// `b[..end]` ends in a double consonant.
    fn doublec(&self, end: usize) -> bool {
        end >= 2 && self.b[end - 1] == self.b[end - 2] && self.cons(end - 1)
    }

    /// `b[..end]` ends consonant-vowel-consonant, last not w, x or y.
    fn cvc(&self, end: usize) -> bool {
        if end < 3 || !self.cons(end - 1) || self.cons(end - 2) || !self.cons(end - 3) {
            return false;
        }
        !matches!(self.b[end - 1], b'w' | b'x' | b'y')
    }

    fn ends(&mut self, suffix: &str) -> bool {
        let s = suffix.as_bytes();
        if s.len() > self.b.len() || !self.b.ends_with(s) {
            return false;
        }
        self.j = self.b.len() - s.len();
        true
    }

    /// Replace `b[j..]` with `s`.
    fn set_to(&mut self, s: &str) {
        self.b.truncate(self.j);
        self.b.extend_from_slice(s.as_bytes());
    }

    fn replace_if_m(&mut self, s: &str) {
        if self.m() > 0 {
            self.set_to(s);
        }
    }

    fn step1ab(&mut self) {
        if self.b.last() == Some(&b's') {
            if self.ends("sses") {
                self.b.truncate(self.b.len() - 2);
            } else if self.ends("ies") {
                self.set_to("i");
            } else if self.b.len() >= 2 && self.b[self.b.len() - 2] != b's' {
                self.b.pop();
            }
        }
        if self.ends("eed") {
            if self.m() > 0 {
                self.b.pop();
            }
        } else if (self.ends("ed") || self.ends("ing")) && self.vowel_in_stem() {
            self.b.truncate(self.j);
            if self.ends("at") {
                self.set_to("ate");
            } else if self.ends("bl") {
                self.set_to("ble");
            } else if self.ends("iz") {
                self.set_to("ize");
            } else if self.doublec(self.b.len()) {
                let last = *self.b.last().expect("non-empty");
                if !matches!(last, b'l' | b's' | b'z') {
                    self.b.pop();
                }
            } else {
                self.j = self.b.len();
                if self.m() == 1 && self.cvc(self.b.len()) {
                    self.b.push(b'e');
                }
            }
        }
    }

    fn step1c(&mut self) {
        if self.ends("y") && self.vowel_in_stem() {
            let n = self.b.len();
            self.b[n - 1] = b'i';
        }
    }

    fn step2(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("abli", "able"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
        ];
        self.apply_first(RULES);
    }

    fn step3(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ];
        self.apply_first(RULES);
    }

    /// Apply the rule for the longest matching suffix, if its stem has m > 0.
    fn apply_first(&mut self, rules: &[(&str, &str)]) {
        let mut best: Option<(&str, &str)> = None;
        for &(suffix, repl) in rules {
            if self.b.ends_with(suffix.as_bytes()) && best.is_none_or(|(s, _)| suffix.len() > s.len()) {
                best = Some((suffix, repl));
            }
        }
        if let Some((suffix, repl)) = best {
            self.ends(suffix);
            self.replace_if_m(repl);
        }
    }

    fn step4(&mut self) {
        const SUFFIXES: &[&str] = &[
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion", "ou", "ism",
            "ate", "iti", "ous", "ive", "ize",
        ];
        let mut best: Option<&str> = None;
        for &suffix in SUFFIXES {
            if self.b.ends_with(suffix.as_bytes()) && best.is_none_or(|s| suffix.len() > s.len()) {
                best = Some(suffix);
            }
        }
        let Some(suffix) = best else {
            return;
        };
        self.ends(suffix);
        if suffix == "ion" && !(self.j > 0 && matches!(self.b[self.j - 1], b's' | b't')) {
            return;
        }
        if self.m() > 1 {
            self.b.truncate(self.j);
        }
    }

    fn step5(&mut self) {
        self.j = self.b.len();
        if self.b.last() == Some(&b'e') {
            self.j = self.b.len() - 1;
            let a = self.m();
            if a > 1 || (a == 1 && !self.cvc(self.b.len() - 1)) {
                self.b.pop();
            }
        }
        self.j = self.b.len();
        if self.b.last() == Some(&b'l') && self.doublec(self.b.len()) && self.m() > 1 {
            self.b.pop();
        }
    }
}
