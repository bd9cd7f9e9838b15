//! Outbound link policy: only Google or Bing search result pages survive.

use url::Url;

use super::AnalysisResult;

const ALLOWED_HOSTS: [&str; 2] = ["www.google.com", "www.bing.com"];

fn has_query(url: &Url) -> bool {
    url.query_pairs().any(|(k, v)| k == "q" && !v.trim().is_empty())
}

/// True when `link` is already in its sanitized, retained form.
pub fn is_allowed_search_link(link: &str) -> bool {
    sanitize_link(link).as_deref() == Some(link)
}

/// Normalized form of an allowed search link, or `None` if it must go.
/// `http` is upgraded to `https`; the query string is kept as written.
pub fn sanitize_link(link: &str) -> Option<String> {
    let mut url = Url::parse(link.trim()).ok()?;
    match url.scheme() {
        "https" => {}
        "http" => url.set_scheme("https").ok()?,
        _ => return None,
    }
    let host_ok = url.host_str().is_some_and(|h| ALLOWED_HOSTS.contains(&h));
    if !host_ok
        || url.port().is_some()
        || !url.username().is_empty()
        || url.password().is_some()
        || url.path() != "/search"
        || !has_query(&url)
    {
        return None;
    }
    url.set_fragment(None);
    Some(url.to_string())
}

/// Clear every link that fails the policy. Layers are kept either way.
pub fn sanitize_links(mut result: AnalysisResult) -> AnalysisResult {
    for instance in &mut result.detected {
        for layer in &mut instance.layers {
            layer.link = layer.link.as_deref().and_then(sanitize_link);
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_links_retained() {
        let google = "https://www.google.com/search?q=the+earth+is+not+flat";
        assert_eq!(sanitize_link(google).as_deref(), Some(google));
        let bing = "https://www.bing.com/search?q=greenland+ice+mass+balance";
        assert_eq!(sanitize_link(bing).as_deref(), Some(bing));
        assert!(is_allowed_search_link(google));
    }

    #[test]
    fn http_upgraded() {
        assert_eq!(
            sanitize_link("http://www.google.com/search?q=x").as_deref(),
            Some("https://www.google.com/search?q=x")
        );
        assert!(!is_allowed_search_link("http://www.google.com/search?q=x"));
    }

    #[test]
    fn rejected_links() {
        for link in [
            "https://evil.example.com/search?q=x",
            "https://google.com/search?q=x",
            "https://www.google.com.evil.io/search?q=x",
            "https://www.google.com/url?q=https://evil.example.com",
            "https://www.google.com/search",
            "https://www.google.com/search?q=",
            "https://www.google.com/search?q=+",
            "https://www.google.com:8443/search?q=x",
            "https://user:pw@www.google.com/search?q=x",
            "javascript:alert(1)",
            "ftp://www.google.com/search?q=x",
            "URL",
            "",
        ] {
            assert_eq!(sanitize_link(link), None, "{link}");
        }
    }

    #[test]
    fn idempotent_on_samples() {
        for link in [
            "http://www.bing.com/search?q=a%20b&form=x#frag",
            "HTTPS://WWW.GOOGLE.COM/search?q=x",
        ] {
            let once = sanitize_link(link).unwrap();
            assert_eq!(sanitize_link(&once).as_deref(), Some(once.as_str()));
        }
    }
}
