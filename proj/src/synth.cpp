#include "adatyper/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "adatyper/table_io.hpp"

namespace adatyper {

std::string_view to_string(SynthDomain d) { return d == SynthDomain::source ? "source" : "target"; }

SynthDomain synth_domain_from_string(std::string_view s) {
  if (s == "source") return SynthDomain::source;
  if (s == "target") return SynthDomain::target;
  throw ConfigError("unknown synthetic domain '" + std::string(s) + "'");
}

namespace {

using Words = std::vector<std::string>;

const Words kCountries{
    "Germany",     "France",      "Spain",        "Italy",          "Netherlands", "Belgium",       "Austria",
    "Switzerland", "Poland",      "Sweden",       "Norway",         "Denmark",     "Finland",       "Ireland",
    "Portugal",    "Greece",      "Hungary",      "Romania",        "Bulgaria",    "Croatia",       "Serbia",
    "Ukraine",     "Russia",      "Turkey",       "Egypt",          "Nigeria",     "Kenya",         "Ghana",
    "Morocco",     "South Africa", "Ethiopia",    "China",          "Japan",       "India",         "Pakistan",
    "Indonesia",   "Vietnam",     "Thailand",     "Philippines",    "Malaysia",    "South Korea",   "Iran",
    "Iraq",        "Israel",      "Saudi Arabia", "United States",  "Canada",      "Mexico",        "Brazil",
    "Argentina",   "Chile",       "Peru",         "Colombia",       "Venezuela",   "Australia",     "New Zealand",
    "Czech Republic", "Slovakia", "Estonia",      "Latvia",         "Lithuania",   "Iceland",       "Cuba"};

const Words kStates{"Alabama",      "Alaska",       "Arizona",       "Arkansas",       "California",
                    "Colorado",     "Connecticut",  "Delaware",      "Florida",        "Georgia",
                    "Hawaii",       "Idaho",        "Illinois",      "Indiana",        "Iowa",
                    "Kansas",       "Kentucky",     "Louisiana",     "Maine",          "Maryland",
                    "Massachusetts", "Michigan",    "Minnesota",     "Mississippi",    "Missouri",
                    "Montana",      "Nebraska",     "Nevada",        "New Hampshire",  "New Jersey",
                    "New Mexico",   "New York",     "North Carolina", "North Dakota",  "Ohio",
                    "Oklahoma",     "Oregon",       "Pennsylvania",  "Rhode Island",   "South Carolina",
                    "South Dakota", "Tennessee",    "Texas",         "Utah",           "Vermont",
                    "Virginia",     "Washington",   "West Virginia", "Wisconsin",      "Wyoming"};

const Words kUsCities{
    "New York",    "Los Angeles",  "Chicago",      "Houston",     "Phoenix",      "Philadelphia", "San Antonio",
    "San Diego",   "Dallas",       "San Jose",     "Austin",      "Jacksonville", "Fort Worth",   "Columbus",
    "Charlotte",   "Indianapolis", "San Francisco", "Seattle",    "Denver",       "Nashville",    "Oklahoma City",
    "El Paso",     "Boston",       "Portland",     "Las Vegas",   "Detroit",      "Memphis",      "Louisville",
    "Baltimore",   "Milwaukee",    "Albuquerque",  "Tucson",      "Fresno",       "Sacramento",   "Mesa",
    "Kansas City", "Atlanta",      "Omaha",        "Raleigh",     "Miami",        "Long Beach",   "Virginia Beach",
    "Oakland",     "Minneapolis",  "Tulsa",        "Tampa",       "Arlington",    "New Orleans",  "Wichita",
    "Cleveland",   "Bakersfield",  "Aurora",       "Anaheim",     "Honolulu",     "Santa Ana",    "Riverside",
    "Corpus Christi", "Lexington", "Henderson",    "Stockton",    "Saint Paul",   "Cincinnati",   "St. Louis",
    "Pittsburgh",  "Greensboro",   "Lincoln",      "Anchorage",   "Plano",        "Orlando",      "Irvine",
    "Newark",      "Durham",       "Chula Vista",  "Toledo",      "Fort Wayne",   "St. Petersburg", "Laredo",
    "Jersey City", "Chandler",     "Madison",      "Lubbock",     "Scottsdale",   "Reno",         "Buffalo"};

const Words kEuCities{
    "Amsterdam",  "Rotterdam", "Utrecht",    "Eindhoven",  "Groningen", "Tilburg",   "Almere",     "Breda",
    "Nijmegen",   "Haarlem",   "Arnhem",     "Zwolle",     "Leiden",    "Maastricht", "Delft",     "Prague",
    "Brno",       "Ostrava",   "Plzen",      "Liberec",    "Olomouc",   "Pardubice", "Berlin",     "Hamburg",
    "Munich",     "Cologne",   "Frankfurt",  "Stuttgart",  "Dresden",   "Leipzig",   "Vienna",     "Graz",
    "Salzburg",   "Zurich",    "Geneva",     "Basel",      "Brussels",  "Antwerp",   "Ghent",      "Bruges",
    "Paris",      "Lyon",      "Marseille",  "Toulouse",   "Nice",      "Bordeaux",  "Madrid",     "Barcelona",
    "Valencia",   "Seville",   "Lisbon",     "Porto",      "Rome",      "Milan",     "Naples",     "Turin",
    "Florence",   "Warsaw",    "Krakow",     "Gdansk",     "Wroclaw",   "Budapest",  "Bratislava", "Copenhagen",
    "Stockholm",  "Oslo",      "Helsinki",   "Dublin",     "Athens",    "Bucharest"};

const Words kFirstNames{
    "James",   "Mary",     "John",    "Patricia", "Robert",  "Jennifer", "Michael", "Linda",    "William", "Elizabeth",
    "David",   "Barbara",  "Richard", "Susan",    "Joseph",  "Jessica",  "Thomas",  "Sarah",    "Charles", "Karen",
    "Daniel",  "Nancy",    "Matthew", "Lisa",     "Anthony", "Betty",    "Mark",    "Margaret", "Donald",  "Sandra",
    "Steven",  "Ashley",   "Paul",    "Kimberly", "Andrew",  "Emily",    "Joshua",  "Donna",    "Kenneth", "Michelle",
    "Kevin",   "Carol",    "Brian",   "Amanda",   "George",  "Melissa",  "Edward",  "Deborah",  "Ronald",  "Stephanie",
    "Jan",     "Petr",     "Jana",    "Eva",      "Pavel",   "Tomas",    "Lucie",   "Martin",   "Katerina", "Jiri",
    "Daan",    "Sem",      "Lucas",   "Emma",     "Julia",   "Sophie",   "Lotte",   "Bram",     "Fleur",   "Jesse",
    "Anna",    "Lena",     "Max",     "Felix",    "Hanna",   "Noah",     "Mia",     "Luca",     "Sara",    "Elias",
    "Olivia",  "Liam",     "Ava",     "Ethan",    "Chloe",   "Mason",    "Grace",   "Logan",    "Zoe",     "Owen"};

const Words kLastNames{
    "Smith",   "Johnson",  "Williams", "Brown",    "Jones",    "Garcia",   "Miller",    "Davis",    "Rodriguez",
    "Martinez", "Hernandez", "Lopez",  "Gonzalez", "Wilson",   "Anderson", "Thomas",    "Taylor",   "Moore",
    "Jackson", "Martin",   "Lee",      "Perez",    "Thompson", "White",    "Harris",    "Sanchez",  "Clark",
    "Ramirez", "Lewis",    "Robinson", "Walker",   "Young",    "Allen",    "King",      "Wright",   "Scott",
    "Novak",   "Svoboda",  "Dvorak",   "Cerny",    "Prochazka", "Kucera",  "de Jong",   "Jansen",   "de Vries",
    "van Dijk", "Bakker",  "Visser",   "Smit",     "Meijer",   "Mueller",  "Schmidt",   "Schneider", "Fischer"};

const Words kCompanyStems{"Acme",    "Globex",   "Initech", "Umbrella", "Stark",   "Wayne",    "Hooli",   "Vandelay",
                          "Soylent", "Cyberdyne", "Tyrell",  "Wonka",   "Gringotts", "Oscorp", "Aperture", "Massive",
                          "Blue Sky", "Northwind", "Contoso", "Fabrikam", "Litware", "Proseware", "Adventure Works",
                          "Tailspin", "Woodgrove", "Lucerne",  "Alpine",  "Coho",    "Fourth Coffee", "Margie",
                          "Pinnacle", "Summit",   "Evergreen", "Silverline", "Redwood", "Bluewater", "Ironclad"};
const Words kCompanySuffixes{"Inc", "Inc.", "LLC", "Ltd", "Corp", "Corporation", "Group", "Holdings", "GmbH", "B.V.",
                             "Co.", "Partners", "Industries", "Systems", "Solutions"};

const Words kProducts{"Laptop",   "Desk Lamp",  "Office Chair", "Coffee Maker", "Headphones", "Keyboard",
                      "Monitor",  "Backpack",   "Water Bottle", "Notebook",     "Phone Case", "Charger",
                      "Blender",  "Toaster",    "Running Shoes", "T-Shirt",     "Jacket",     "Sunglasses",
                      "Wallet",   "Watch",      "Camera",       "Tablet",       "Printer",    "Router",
                      "Speaker",  "Microphone", "Desk",         "Bookshelf",    "Mattress",   "Pillow"};

const Words kContinents{"Africa", "Asia", "Europe", "North America", "South America", "Oceania", "Antarctica"};
const Words kCounties{"Orange County", "Cook County", "Harris County", "Maricopa County", "King County",
                      "Dallas County", "Kings County", "Queens County", "Clark County", "Tarrant County",
                      "Bexar County", "Wayne County", "Santa Clara County", "Broward County", "Travis County"};
const Words kCountryCodes{"US", "DE", "FR", "NL", "BE", "CZ", "GB", "ES", "IT", "PL", "SE", "NO",
                          "DK", "FI", "IE", "PT", "AT", "CH", "JP", "CN", "IN", "BR", "CA", "AU"};
const Words kCurrencies{"USD", "EUR", "GBP", "JPY", "CHF", "CZK", "SEK", "NOK", "DKK", "PLN", "CAD", "AUD", "CNY"};
const Words kMonths{"January", "February", "March",     "April",   "May",      "June",
                    "July",    "August",   "September", "October", "November", "December"};
const Words kStreets{"Main St", "Oak Ave", "Maple Rd", "Cedar Ln", "Elm St", "Park Ave", "Pine St",
                     "Lake Dr", "Hill Rd", "Church St", "High St", "Mill Rd", "River Rd", "Sunset Blvd"};
const Words kDutchStreets{"Kerkstraat", "Dorpsstraat", "Stationsweg", "Molenweg", "Schoolstraat", "Beukenlaan",
                          "Parallelweg", "Julianastraat", "Nieuwstraat", "Eikenlaan"};
const Words kEmailDomains{"gmail.com", "yahoo.com", "outlook.com", "example.com", "mail.com", "company.org"};
const Words kTargetEmailDomains{"seznam.cz", "centrum.cz", "ziggo.nl", "kpnmail.nl", "web.de", "gmx.net"};

// Background vocabularies.
const Words kStatus{"active", "inactive", "pending", "closed", "open", "approved", "rejected", "draft", "archived"};
const Words kColors{"red", "green", "blue", "yellow", "black", "white", "orange", "purple", "grey", "brown"};
const Words kBool{"yes", "no", "true", "false", "Y", "N", "1", "0"};
const Words kSizes{"S", "M", "L", "XL", "XXL", "small", "medium", "large"};
const Words kWords{"the",    "quick",  "report",   "data",   "value",  "review", "customer", "order",  "sample",
                   "test",   "note",   "missing",  "update", "check",  "item",   "service",  "request", "issue",
                   "result", "final",  "interim",  "budget", "plan",   "draft",  "meeting",  "call",   "email",
                   "follow", "up",     "received", "sent",   "shipped", "delayed", "urgent", "minor",  "major"};
const Words kCategories{"Electronics", "Books", "Clothing", "Toys", "Garden", "Sports", "Food", "Health", "Beauty",
                        "Automotive", "Music", "Office"};
const Words kDepartments{"Sales", "Marketing", "Finance", "HR", "Engineering", "Support", "Legal", "Operations",
                         "IT", "Research"};
const Words kLanguages{"English", "German", "French", "Spanish", "Dutch", "Czech", "Italian", "Polish", "Chinese"};

std::string digits(Rng& rng, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<char>('0' + uniform_index(rng, 10)));
  return s;
}

std::string letters_upper(Rng& rng, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<char>('A' + uniform_index(rng, 26)));
  return s;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string pad2(long long v) { return (v < 10 ? "0" : "") + std::to_string(v); }

using ValueFn = std::function<std::string(SynthDomain, Rng&)>;

struct Generator {
  std::string type;
  ValueFn value;
  Words source_headers;
  Words target_headers;
};

std::string email(SynthDomain d, Rng& rng) {
  const auto& domains = d == SynthDomain::source ? kEmailDomains : kTargetEmailDomains;
  std::string local = lower(pick(kFirstNames, rng));
  switch (uniform_index(rng, 3)) {
    case 0: local += "." + lower(pick(kLastNames, rng)); break;
    case 1: local += digits(rng, 2); break;
    default: local += "_" + lower(pick(kLastNames, rng)).substr(0, 1); break;
  }
  local.erase(std::remove(local.begin(), local.end(), ' '), local.end());
  return local + "@" + pick(domains, rng);
}

std::string phone(SynthDomain d, Rng& rng) {
  if (d == SynthDomain::target && uniform01(rng) < 0.5) return "+420 " + digits(rng, 3) + " " + digits(rng, 3) + " " + digits(rng, 3);
  switch (uniform_index(rng, 3)) {
    case 0: return "(" + digits(rng, 3) + ") " + digits(rng, 3) + "-" + digits(rng, 4);
    case 1: return digits(rng, 3) + "-" + digits(rng, 3) + "-" + digits(rng, 4);
    default: return "+1 " + digits(rng, 3) + " " + digits(rng, 3) + " " + digits(rng, 4);
  }
}

std::string date(SynthDomain d, Rng& rng) {
  const auto y = uniform_int(rng, 1990, 2023);
  const auto m = uniform_int(rng, 1, 12);
  const auto day = uniform_int(rng, 1, 28);
  if (d == SynthDomain::target) return std::to_string(day) + "." + std::to_string(m) + "." + std::to_string(y);
  if (uniform01(rng) < 0.6) return std::to_string(y) + "-" + pad2(m) + "-" + pad2(day);
  return std::to_string(m) + "/" + std::to_string(day) + "/" + std::to_string(y);
}

std::string price(SynthDomain d, Rng& rng) {
  const double v = std::exp(uniform01(rng) * 6.0);
  if (d == SynthDomain::target) return fixed(v, 2) + " EUR";
  return uniform01(rng) < 0.3 ? "$" + fixed(v, 2) : fixed(v, 2);
}

std::string company(SynthDomain, Rng& rng) { return pick(kCompanyStems, rng) + " " + pick(kCompanySuffixes, rng); }

std::string postal(SynthDomain, Rng& rng) {
  return uniform01(rng) < 0.8 ? digits(rng, 5) : digits(rng, 5) + "-" + digits(rng, 4);
}

std::string address(SynthDomain d, Rng& rng) {
  if (d == SynthDomain::target) return pick(kDutchStreets, rng) + " " + std::to_string(uniform_int(rng, 1, 200));
  return std::to_string(uniform_int(rng, 1, 9999)) + " " + pick(kStreets, rng);
}

const std::vector<Generator>& generators() {
  static const std::vector<Generator> gens = [] {
    std::vector<Generator> g;
    auto words = [](const Words& w) { return [&w](SynthDomain, Rng& rng) { return pick(w, rng); }; };
    g.push_back({"country", words(kCountries), {"country", "Country", "country_name", "nation", "origin"},
                 {"stat", "zeme", "land", "nationality", "ctry"}});
    g.push_back({"state", words(kStates), {"state", "State", "state_name", "us_state", "province"},
                 {"st", "region", "prov", "stateName"}});
    g.push_back({"city",
                 [](SynthDomain d, Rng& rng) { return pick(d == SynthDomain::source ? kUsCities : kEuCities, rng); },
                 {"city", "City", "city_name", "town", "municipality"},
                 {"plaats", "mesto", "woonplaats", "loc", "residence"}});
    g.push_back({"gender",
                 [](SynthDomain d, Rng& rng) {
                   if (d == SynthDomain::target) return std::string(uniform01(rng) < 0.5 ? "M" : "F");
                   static const Words w{"male", "female", "Male", "Female"};
                   return pick(w, rng);
                 },
                 {"gender", "Gender", "sex", "gender_code"},
                 {"geslacht", "pohlavi", "sx", "mf"}});
    g.push_back({"age", [](SynthDomain, Rng& rng) { return std::to_string(uniform_int(rng, 18, 90)); },
                 {"age", "Age", "age_years", "customer_age"},
                 {"leeftijd", "vek", "yrs", "ag"}});
    g.push_back({"email", email, {"email", "Email", "e-mail", "email_address", "contact"},
                 {"mail", "emailAddr", "eml", "kontakt"}});
    g.push_back({"phone number", phone, {"phone", "phone_number", "Phone", "telephone", "mobile"},
                 {"tel", "telefon", "gsm", "ph"}});
    g.push_back({"date", date, {"date", "Date", "created_date", "order_date", "timestamp"},
                 {"datum", "dt", "when", "dat"}});
    g.push_back({"company name", company, {"company", "company_name", "Company", "employer", "organization"},
                 {"firma", "bedrijf", "org", "comp"}});
    g.push_back({"price", price, {"price", "Price", "unit_price", "cost", "amount"},
                 {"prijs", "cena", "prc", "amt"}});
    g.push_back({"first name", words(kFirstNames), {"first_name", "firstName", "First Name", "given_name", "name"},
                 {"fname", "voornaam", "jmeno", "given"}});
    g.push_back({"last name", words(kLastNames), {"last_name", "lastName", "surname", "family_name"},
                 {"lname", "achternaam", "prijmeni", "sname"}});
    g.push_back({"postal code", postal, {"zip", "zip_code", "postal_code", "zipcode", "PostalCode"},
                 {"postcode", "psc", "pc", "zip"}});
    g.push_back({"address", address, {"address", "street_address", "Address", "addr"},
                 {"adres", "straat", "ulice", "street"}});
    g.push_back({"year", [](SynthDomain, Rng& rng) { return std::to_string(uniform_int(rng, 1950, 2023)); },
                 {"year", "Year", "yr", "season"}, {"jaar", "rok", "yy", "yr"}});
    g.push_back({"month", words(kMonths), {"month", "Month", "mon"}, {"maand", "mesic", "mnth"}});
    g.push_back({"product", words(kProducts), {"product", "item", "product_name", "Product"},
                 {"artikel", "vyrobek", "prod", "itm"}});
    g.push_back({"currency", words(kCurrencies), {"currency", "Currency", "ccy", "curr"}, {"valuta", "mena", "cur"}});
    g.push_back({"percentage",
                 [](SynthDomain, Rng& rng) { return fixed(uniform01(rng) * 100.0, 1) + "%"; },
                 {"percentage", "pct", "percent", "rate"}, {"procent", "pct", "perc"}});
    g.push_back({"id", [](SynthDomain, Rng& rng) { return std::to_string(uniform_int(rng, 1000, 999999)); },
                 {"id", "ID", "record_id", "customer_id", "key"}, {"id", "nr", "cislo", "ident"}});
    g.push_back({"continent", words(kContinents), {"continent", "Continent", "region"}, {"werelddeel", "kontinent"}});
    g.push_back({"county", words(kCounties), {"county", "County", "county_name"}, {"okres", "gemeente"}});
    g.push_back({"country code", words(kCountryCodes), {"country_code", "iso", "cc", "iso2"}, {"landcode", "kod"}});
    g.push_back({"latitude", [](SynthDomain, Rng& rng) { return fixed(uniform01(rng) * 180.0 - 90.0, 5); },
                 {"latitude", "lat", "Latitude"}, {"breedtegraad", "lat"}});
    g.push_back({"longitude", [](SynthDomain, Rng& rng) { return fixed(uniform01(rng) * 360.0 - 180.0, 5); },
                 {"longitude", "lon", "lng", "Longitude"}, {"lengtegraad", "lon"}});
    g.push_back({"week", [](SynthDomain, Rng& rng) { return std::to_string(uniform_int(rng, 1, 52)); },
                 {"week", "week_no", "wk"}, {"week", "tyden"}});

    // Columns of no catalog type.
    g.push_back({"noise:status", words(kStatus), {"status", "state_flag", "stage"}, {"stav", "status"}});
    g.push_back({"noise:color", words(kColors), {"color", "colour", "Color"}, {"kleur", "barva"}});
    g.push_back({"noise:bool", words(kBool), {"active", "is_valid", "flag", "enabled"}, {"actief", "aktivni"}});
    g.push_back({"noise:size", words(kSizes), {"size", "Size"}, {"maat", "velikost"}});
    g.push_back({"noise:category", words(kCategories), {"category", "Category", "segment"}, {"categorie", "kat"}});
    g.push_back({"noise:department", words(kDepartments), {"department", "dept", "team"}, {"afdeling", "oddeleni"}});
    g.push_back({"noise:language", words(kLanguages), {"language", "lang"}, {"taal", "jazyk"}});
    g.push_back({"noise:text",
                 [](SynthDomain, Rng& rng) {
                   std::string s;
                   const auto n = uniform_int(rng, 2, 6);
                   for (long long i = 0; i < n; ++i) s += (i ? " " : "") + pick(kWords, rng);
                   return s;
                 },
                 {"notes", "comment", "description", "remarks"}, {"opmerking", "poznamka", "omschrijving"}});
    g.push_back({"noise:code",
                 [](SynthDomain, Rng& rng) { return letters_upper(rng, 2) + "-" + digits(rng, 4); },
                 {"code", "sku", "ref", "reference"}, {"kod", "ref"}});
    g.push_back({"noise:score", [](SynthDomain, Rng& rng) { return fixed(uniform01(rng), 3); },
                 {"score", "probability", "weight"}, {"skore", "gewicht"}});
    g.push_back({"noise:count", [](SynthDomain, Rng& rng) { return std::to_string(uniform_int(rng, 0, 500)); },
                 {"count", "quantity", "qty", "n"}, {"aantal", "pocet"}});
    g.push_back({"noise:time",
                 [](SynthDomain, Rng& rng) { return pad2(uniform_int(rng, 0, 23)) + ":" + pad2(uniform_int(rng, 0, 59)); },
                 {"time", "start_time", "hour"}, {"tijd", "cas"}});
    g.push_back({"noise:url",
                 [](SynthDomain, Rng& rng) { return "https://www." + lower(pick(kWords, rng)) + pick(kWords, rng) + ".com/" + digits(rng, 3); },
                 {"url", "website", "link"}, {"odkaz", "web"}});
    return g;
  }();
  return gens;
}

const Generator& generator(std::string_view type) {
  for (const auto& g : generators()) {
    if (g.type == type) return g;
  }
  throw ConfigError("no synthetic generator for type '" + std::string(type) + "'");
}

const Words kJunkHeaders{"col1", "col2", "col3", "field", "value", "data", "attr", "column", "x", "var1", "info",
                         "misc", "f1", "f2", "c"};

std::string pick_header(const Generator& g, SynthDomain d, Rng& rng) {
  const double u = uniform01(rng);
  if (d == SynthDomain::source) {
    if (u < 0.30) return pick(kJunkHeaders, rng) + (uniform01(rng) < 0.5 ? std::to_string(uniform_int(rng, 1, 9)) : "");
    return pick(g.source_headers, rng);
  }
  if (u < 0.30) return pick(kJunkHeaders, rng);
  return pick(g.target_headers, rng);
}

}  // namespace

const std::vector<std::string>& synth_type_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& g : generators()) out.push_back(g.type);
    return out;
  }();
  return names;
}

std::string gold_under(const TypeCatalog& catalog, std::string_view generated_type) {
  if (generated_type.rfind("noise:", 0) == 0 || !catalog.contains(generated_type)) return std::string(kNullType);
  return std::string(generated_type);
}

std::string synth_value(std::string_view type, SynthDomain domain, Rng& rng) {
  return generator(type).value(domain, rng);
}

Column synth_column(std::string_view type, SynthDomain domain, std::size_t rows, Rng& rng, std::string table_id) {
  const auto& g = generator(type);
  auto header = pick_header(g, domain, rng);
  std::vector<std::string> values;
  values.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    // A few missing cells.
    values.push_back(uniform01(rng) < 0.03 ? std::string() : g.value(domain, rng));
  }
  if (std::all_of(values.begin(), values.end(), [](const auto& v) { return v.empty(); })) {
    values.front() = g.value(domain, rng);
  }
  return Column(std::move(header), std::move(values), std::move(table_id));
}

SynthCorpus generate_synthetic_corpus(const SynthOptions& opts) {
  if (opts.min_columns < 1 || opts.max_columns < opts.min_columns) throw ConfigError("bad column range");
  if (opts.min_rows < 1 || opts.max_rows < opts.min_rows) throw ConfigError("bad row range");
  const auto& pool = opts.types.empty() ? synth_type_names() : opts.types;
  for (const auto& t : pool) generator(t);
  for (const auto& t : opts.null_types) generator(t);
  if (opts.null_fraction < 0.0 || opts.null_fraction > 1.0) throw ConfigError("null_fraction must be in [0, 1]");

  SynthCorpus out;
  std::map<std::string, std::size_t> counts;
  for (std::size_t t = 0; t < opts.n_tables; ++t) {
    Rng rng(derive_seed(opts.seed, t));
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "%06zu", t);
    const std::string id = opts.table_prefix + "-" + idbuf;
    const auto n_cols = static_cast<std::size_t>(uniform_int(rng, static_cast<long long>(opts.min_columns),
                                                             static_cast<long long>(opts.max_columns)));
    const auto rows = static_cast<std::size_t>(uniform_int(rng, static_cast<long long>(opts.min_rows),
                                                           static_cast<long long>(opts.max_rows)));
    std::vector<Column> cols;
    for (std::size_t c = 0; c < n_cols; ++c) {
      const bool from_null = !opts.null_types.empty() && uniform01(rng) < opts.null_fraction;
      const auto& type = from_null ? pick(opts.null_types, rng) : pick(pool, rng);
      cols.push_back(synth_column(type, opts.domain, rows, rng, id));
      out.labels.push_back({ColumnRef{id, c}, type});
      ++counts[type];
    }
    out.tables.emplace_back(id, std::move(cols));
  }
  out.manifest = {{"generator", "adatyper-synth"},
                  {"generator_version", 1},
                  {"seed", opts.seed},
                  {"domain", std::string(to_string(opts.domain))},
                  {"n_tables", out.tables.size()},
                  {"n_columns", out.labels.size()},
                  {"type_counts", counts}};
  return out;
}

std::vector<LabeledSource> SynthCorpus::labeled(const TypeCatalog& catalog) const {
  std::vector<LabeledSource> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    out.push_back({column(l.ref), gold_under(catalog, l.type_name), l.ref.to_string()});
  }
  return out;
}

const Column& SynthCorpus::column(const ColumnRef& ref) const {
  for (const auto& t : tables) {
    if (t.id() == ref.table_id) return t.column(ref.column_index);
  }
  throw Error("unknown column " + ref.to_string());
}

void write_corpus_dir(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "tables");
  for (const auto& t : corpus.tables) {
    std::ofstream out(dir / "tables" / (t.id() + ".csv"), std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write table " + t.id());
    out << to_delimited(t);
  }
  std::ofstream labels(dir / "labels.csv", std::ios::binary | std::ios::trunc);
  labels << "table,column,type\n";
  for (const auto& l : corpus.labels) {
    labels << l.ref.table_id << ',' << l.ref.column_index << ',' << l.type_name << '\n';
  }
  std::ofstream manifest(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  manifest << corpus.manifest.dump(2) << '\n';
}

SynthCorpus read_corpus_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir / "tables")) {
    throw Error("corpus directory '" + dir.string() + "' has no tables/ subdirectory");
  }
  SynthCorpus out;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir / "tables")) {
    if (e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.tables.push_back(read_delimited_file(f));

  std::map<ColumnRef, std::string> labels;
  if (std::filesystem::exists(dir / "labels.csv")) {
    std::ifstream in(dir / "labels.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto text = ss.str();
    if (text.find('\n') != std::string::npos && text.find('\n') + 1 < text.size()) {
      const auto lt = parse_delimited(text, "labels");
      for (std::size_t r = 0; r < lt.n_rows(); ++r) {
        try {
          labels[{lt.column(0).values()[r], std::stoul(lt.column(1).values()[r])}] = lt.column(2).values()[r];
        } catch (const std::logic_error&) {
          throw TableParseError(r + 1, "labels.csv: bad column index '" + lt.column(1).values()[r] + "'");
        }
      }
    }
  }
  for (const auto& t : out.tables) {
    for (std::size_t c = 0; c < t.n_columns(); ++c) {
      ColumnRef ref{t.id(), c};
      auto it = labels.find(ref);
      out.labels.push_back({ref, it == labels.end() ? std::string() : it->second});
    }
  }
  if (std::filesystem::exists(dir / "manifest.json")) {
    std::ifstream in(dir / "manifest.json");
    try {
      out.manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("manifest.json: ") + e.what());
    }
  }
  return out;
}

}  // namespace adatyper
